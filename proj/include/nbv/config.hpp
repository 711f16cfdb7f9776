#pragma once

#include <map>
#include <string>
#include <vector>

namespace nbv {

// key = value text configuration with # comments. Every key has a built-in
// default; unknown keys are rejected so typos fail loudly. Accessors record the
// resolved value for the run manifest.
class Config {
  public:
    Config() = default;

    static Config from_file(const std::string& path, const std::vector<std::string>& known_keys);
    static Config from_text(const std::string& text, const std::vector<std::string>& known_keys);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& fallback) const;

    // every key touched by an accessor, with the value that was used
    const std::map<std::string, std::string>& resolved() const { return resolved_; }

  private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> resolved_;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// run_manifest.txt: artifact version, command line, seed, and the resolved
// configuration; deliberately timestamp-free so reruns are byte-identical.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::vector<std::string>& args, uint64_t seed, int jobs,
                    const Config& config);

}  // namespace nbv
