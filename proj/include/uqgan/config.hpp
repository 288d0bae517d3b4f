// Flat key=value configuration files with typed, schema-checked access.
//
// Format: one `key = value` pair per line; `#` starts a comment; blank lines
// ignored.  Keys are dotted lowercase identifiers.  Values keep their raw
// trimmed text until a typed getter converts them.  Every key must be
// consumed by the schema — finish() rejects unknown keys, and all errors cite
// the source name and line number.

#pragma once

#include "uqgan/errors.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace uqgan::config {

struct KeyValue {
    std::string value;
    int line = 0;  // 1-based line in the source file
};

// Parse the raw text; `source` names the origin in error messages.
std::map<std::string, KeyValue> parse_key_values(const std::string& text,
                                                 const std::string& source);

class Reader {
  public:
    Reader(std::map<std::string, KeyValue> values, std::string source);

    // Read a whole file; throws IoError if unreadable.
    static Reader from_file(const std::string& path);
    static Reader from_text(const std::string& text,
                            const std::string& source = "<inline>");

    bool has(const std::string& key) const;

    // Required-value getters throw ConfigError when the key is missing;
    // defaulted overloads return the fallback instead.
    std::string get_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key);
    double get_double(const std::string& key, double fallback);
    int get_int(const std::string& key);
    int get_int(const std::string& key, int fallback);
    std::uint64_t get_u64(const std::string& key);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key);
    bool get_bool(const std::string& key, bool fallback);

    // Comma-separated lists; empty value -> empty list.
    std::vector<int> get_int_list(const std::string& key,
                                  const std::vector<int>& fallback);
    std::vector<std::uint64_t> get_u64_list(const std::string& key,
                                            const std::vector<std::uint64_t>& fallback);
    std::vector<std::string> get_string_list(const std::string& key,
                                             const std::vector<std::string>& fallback);

    // Throws ConfigError naming every key no getter consumed.
    void finish() const;

    const std::string& source() const { return source_; }

  private:
    const KeyValue* fetch(const std::string& key);  // marks consumed
    [[noreturn]] void fail(const std::string& key, const KeyValue& kv,
                           const std::string& what) const;

    std::map<std::string, KeyValue> values_;
    std::set<std::string> consumed_;
    std::string source_;
};

}  // namespace uqgan::config
