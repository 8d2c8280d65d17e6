#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cplab::cfg {

enum class KeyType { Int, Real, Str, Bool };

struct KeySpec {
    const char* key;
    KeyType type;
    const char* default_value;
    const char* doc;
};

/// Every documented key with its default and one-line description.
const std::vector<KeySpec>& key_registry();

/// Flat dotted-key configuration; every key has a documented default,
/// unknown keys are rejected with the valid-key list.
class RunConfig {
public:
    RunConfig();  // defaults

    /// Parses `key = value` lines ('#' comments allowed).
    static RunConfig from_file(const std::string& path);

    /// Applies one `key=value` override (the CLI --set form).
    void set(const std::string& key, const std::string& value);

    std::int64_t get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    const std::string& get_str(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    /// Canonical "key = value" lines, sorted; the config digest hashes this.
    std::string canonical_text() const;
    std::string digest() const;

    /// Output root: $CPLAB_OUT when set, else the current directory; the
    /// `out.dir` key appends beneath it.
    std::string output_dir() const;

private:
    const KeySpec& spec_for(const std::string& key) const;
    std::map<std::string, std::string> values_;
};

}  // namespace cplab::cfg
