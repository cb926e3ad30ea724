#ifndef TRAJPRISM_JSONL_HPP
#define TRAJPRISM_JSONL_HPP

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include "json.hpp"

namespace trajprism {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// Every persisted file starts with {"_schema": kind, "version": N}.
inline constexpr int kSchemaVersion = 1;

/// Calls fn(line_number, object) for every non-empty line; the schema
/// header line is skipped. Malformed JSON raises ParseError.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(std::size_t, const json&)>& fn);

/// Line-oriented writer that emits the schema header on open.
class JsonlWriter {
public:
    JsonlWriter(const std::filesystem::path& path, std::string_view schema);

    template <typename J>
    void write(const J& obj) {
        out_ << obj.dump() << '\n';
    }

    void close() { out_.close(); }

private:
    std::ofstream out_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

} // namespace trajprism

#endif // TRAJPRISM_JSONL_HPP
