#pragma once

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>

namespace causalid {

// Set of variable indices over a single graph, packed into one machine word.
// Graphs are capped at kMaxVariables so every set operation is O(1).
class VarSet {
public:
    static constexpr int kMaxVariables = 64;

    constexpr VarSet() = default;
    constexpr explicit VarSet(std::uint64_t bits) : bits_(bits) {}
    VarSet(std::initializer_list<int> indices) {
        for (int i : indices) insert(i);
    }

    static constexpr VarSet single(int index) { return VarSet(bit(index)); }
    static constexpr VarSet first_n(int n) {
        return VarSet(n >= kMaxVariables ? ~std::uint64_t{0} : (std::uint64_t{1} << n) - 1);
    }

    constexpr bool empty() const { return bits_ == 0; }
    constexpr int size() const { return std::popcount(bits_); }
    constexpr bool contains(int index) const { return (bits_ & bit(index)) != 0; }
    constexpr bool contains_all(VarSet other) const { return (other.bits_ & ~bits_) == 0; }
    constexpr bool intersects(VarSet other) const { return (bits_ & other.bits_) != 0; }
    constexpr std::uint64_t bits() const { return bits_; }

    void insert(int index) { bits_ |= bit(index); }
    void erase(int index) { bits_ &= ~bit(index); }

    constexpr VarSet operator|(VarSet o) const { return VarSet(bits_ | o.bits_); }
    constexpr VarSet operator&(VarSet o) const { return VarSet(bits_ & o.bits_); }
    constexpr VarSet operator-(VarSet o) const { return VarSet(bits_ & ~o.bits_); }
    VarSet& operator|=(VarSet o) { bits_ |= o.bits_; return *this; }
    VarSet& operator&=(VarSet o) { bits_ &= o.bits_; return *this; }
    VarSet& operator-=(VarSet o) { bits_ &= ~o.bits_; return *this; }
    constexpr bool operator==(const VarSet&) const = default;

    // Lowest index, -1 when empty.
    constexpr int first() const { return bits_ == 0 ? -1 : std::countr_zero(bits_); }

    // Iterates indices in ascending order.
    class iterator {
    public:
        constexpr explicit iterator(std::uint64_t bits) : bits_(bits) {}
        constexpr int operator*() const { return std::countr_zero(bits_); }
        constexpr iterator& operator++() { bits_ &= bits_ - 1; return *this; }
        constexpr bool operator!=(const iterator& o) const { return bits_ != o.bits_; }
    private:
        std::uint64_t bits_;
    };
    constexpr iterator begin() const { return iterator(bits_); }
    constexpr iterator end() const { return iterator(0); }

private:
    static constexpr std::uint64_t bit(int index) {
        if (index < 0 || index >= kMaxVariables)
            throw std::out_of_range("VarSet index out of range");
        return std::uint64_t{1} << index;
    }

    std::uint64_t bits_ = 0;
};

}  // namespace causalid
