#include "uqgan/config.hpp"

#include <cctype>
#include <climits>
#include <fstream>
#include <sstream>

namespace uqgan::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '_' || c == '.';
        if (!ok) return false;
    }
    return true;
}

std::vector<std::string> split_list(const std::string& raw) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(raw);
    while (std::getline(in, item, ',')) parts.push_back(trim(item));
    if (!parts.empty() && parts.back().empty()) parts.pop_back();  // trailing comma
    return parts;
}

}  // namespace

std::map<std::string, KeyValue> parse_key_values(const std::string& text,
                                                 const std::string& source) {
    std::map<std::string, KeyValue> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(source + ":" + std::to_string(lineno) +
                              ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        if (!valid_key(key))
            throw ConfigError(source + ":" + std::to_string(lineno) +
                              ": invalid key '" + key + "'");
        if (out.count(key))
            throw ConfigError(source + ":" + std::to_string(lineno) +
                              ": duplicate key '" + key + "' (first set on line " +
                              std::to_string(out[key].line) + ")");
        out[key] = KeyValue{trim(line.substr(eq + 1)), lineno};
    }
    return out;
}

Reader::Reader(std::map<std::string, KeyValue> values, std::string source)
    : values_(std::move(values)), source_(std::move(source)) {}

Reader Reader::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return Reader(parse_key_values(buf.str(), path), path);
}

Reader Reader::from_text(const std::string& text, const std::string& source) {
    return Reader(parse_key_values(text, source), source);
}

bool Reader::has(const std::string& key) const { return values_.count(key) > 0; }

const KeyValue* Reader::fetch(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    consumed_.insert(key);
    return &it->second;
}

void Reader::fail(const std::string& key, const KeyValue& kv,
                  const std::string& what) const {
    throw ConfigError(source_ + ":" + std::to_string(kv.line) + ": key '" + key +
                      "': " + what + " (value: '" + kv.value + "')");
}

std::string Reader::get_string(const std::string& key) {
    const KeyValue* kv = fetch(key);
    if (!kv) throw ConfigError(source_ + ": missing required key '" + key + "'");
    return kv->value;
}

std::string Reader::get_string(const std::string& key, const std::string& fallback) {
    const KeyValue* kv = fetch(key);
    return kv ? kv->value : fallback;
}

double Reader::get_double(const std::string& key) {
    const KeyValue* kv = fetch(key);
    if (!kv) throw ConfigError(source_ + ": missing required key '" + key + "'");
    try {
        std::size_t pos = 0;
        const double v = std::stod(kv->value, &pos);
        if (pos != kv->value.size()) fail(key, *kv, "not a number");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail(key, *kv, "not a number");
    }
}

double Reader::get_double(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
}

int Reader::get_int(const std::string& key) {
    const KeyValue* kv = fetch(key);
    if (!kv) throw ConfigError(source_ + ": missing required key '" + key + "'");
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(kv->value, &pos);
        if (pos != kv->value.size() || v < INT_MIN || v > INT_MAX)
            fail(key, *kv, "not an integer");
        return int(v);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail(key, *kv, "not an integer");
    }
}

int Reader::get_int(const std::string& key, int fallback) {
    return has(key) ? get_int(key) : fallback;
}

std::uint64_t Reader::get_u64(const std::string& key) {
    const KeyValue* kv = fetch(key);
    if (!kv) throw ConfigError(source_ + ": missing required key '" + key + "'");
    try {
        std::size_t pos = 0;
        if (!kv->value.empty() && kv->value[0] == '-')
            fail(key, *kv, "not a nonnegative integer");
        const unsigned long long v = std::stoull(kv->value, &pos);
        if (pos != kv->value.size()) fail(key, *kv, "not a nonnegative integer");
        return std::uint64_t(v);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail(key, *kv, "not a nonnegative integer");
    }
}

std::uint64_t Reader::get_u64(const std::string& key, std::uint64_t fallback) {
    return has(key) ? get_u64(key) : fallback;
}

bool Reader::get_bool(const std::string& key) {
    const KeyValue* kv = fetch(key);
    if (!kv) throw ConfigError(source_ + ": missing required key '" + key + "'");
    if (kv->value == "true" || kv->value == "1") return true;
    if (kv->value == "false" || kv->value == "0") return false;
    fail(key, *kv, "expected true/false/1/0");
}

bool Reader::get_bool(const std::string& key, bool fallback) {
    return has(key) ? get_bool(key) : fallback;
}

std::vector<int> Reader::get_int_list(const std::string& key,
                                      const std::vector<int>& fallback) {
    const KeyValue* kv = fetch(key);
    if (!kv) return fallback;
    std::vector<int> out;
    for (const std::string& part : split_list(kv->value)) {
        try {
            std::size_t pos = 0;
            const long long v = std::stoll(part, &pos);
            if (pos != part.size() || v < INT_MIN || v > INT_MAX)
                fail(key, *kv, "list entry '" + part + "' is not an integer");
            out.push_back(int(v));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail(key, *kv, "list entry '" + part + "' is not an integer");
        }
    }
    return out;
}

std::vector<std::uint64_t> Reader::get_u64_list(
    const std::string& key, const std::vector<std::uint64_t>& fallback) {
    const KeyValue* kv = fetch(key);
    if (!kv) return fallback;
    std::vector<std::uint64_t> out;
    for (const std::string& part : split_list(kv->value)) {
        try {
            std::size_t pos = 0;
            if (!part.empty() && part[0] == '-')
                fail(key, *kv, "list entry '" + part + "' is negative");
            const unsigned long long v = std::stoull(part, &pos);
            if (pos != part.size())
                fail(key, *kv, "list entry '" + part + "' is not an integer");
            out.push_back(std::uint64_t(v));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail(key, *kv, "list entry '" + part + "' is not an integer");
        }
    }
    return out;
}

std::vector<std::string> Reader::get_string_list(
    const std::string& key, const std::vector<std::string>& fallback) {
    const KeyValue* kv = fetch(key);
    if (!kv) return fallback;
    return split_list(kv->value);
}

void Reader::finish() const {
    std::string unknown;
    for (const auto& [key, kv] : values_) {
        if (consumed_.count(key)) continue;
        if (!unknown.empty()) unknown += ", ";
        unknown += "'" + key + "' (line " + std::to_string(kv.line) + ")";
    }
    if (!unknown.empty())
        throw ConfigError(source_ + ": unknown keys: " + unknown);
}

}  // namespace uqgan::config
