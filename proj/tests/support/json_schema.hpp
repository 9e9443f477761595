#pragma once

// Minimal JSON-Schema checker covering the subset the shipped report schema
// uses: type (incl. lists), enum, required, properties, items.

#include <string>

#include <json.hpp>

namespace causalid::testing {

inline bool type_matches(const nlohmann::json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
    if (type == "number") return value.is_number();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    return false;
}

inline bool validate_schema(const nlohmann::json& value, const nlohmann::json& schema,
                            std::string* why = nullptr) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (schema.contains("type")) {
        const auto& t = schema["type"];
        bool ok = false;
        if (t.is_string()) ok = type_matches(value, t.get<std::string>());
        else
            for (const auto& alt : t)
                ok = ok || type_matches(value, alt.get<std::string>());
        if (!ok) return fail("type mismatch against " + t.dump() + " for " + value.dump());
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& alt : schema["enum"]) ok = ok || alt == value;
        if (!ok) return fail("value " + value.dump() + " not in enum");
    }
    if (schema.contains("required"))
        for (const auto& key : schema["required"])
            if (!value.contains(key.get<std::string>()))
                return fail("missing required key " + key.get<std::string>());
    if (schema.contains("properties") && value.is_object())
        for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it)
            if (value.contains(it.key()) && !validate_schema(value[it.key()], it.value(), why))
                return false;
    if (schema.contains("items") && value.is_array())
        for (const auto& item : value)
            if (!validate_schema(item, schema["items"], why)) return false;
    if (why) why->clear();
    return true;
}

}  // namespace causalid::testing
