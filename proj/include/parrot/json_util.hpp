#pragma once

#include <parrot/errors.hpp>

#include <nlohmann/json.hpp>

#include <initializer_list>
#include <string>
#include <string_view>

namespace parrot::json_util {

// Rejects any key of `obj` not in `allowed`; `where` prefixes the diagnostic.
void require_known_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed,
                        std::string_view where);

void require_object(const nlohmann::json& j, std::string_view where);

template <class T>
T get_or(const nlohmann::json& obj, const char* key, T fallback, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        return fallback;
    }
    try {
        return it->template get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string(where) + "." + key + ": wrong type");
    }
}

template <class T>
T get_required(const nlohmann::json& obj, const char* key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ConfigError(std::string(where) + "." + key + ": missing required key");
    }
    try {
        return it->template get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string(where) + "." + key + ": wrong type");
    }
}

nlohmann::json read_json_file(const std::string& path);

}  // namespace parrot::json_util
