#include "trajprism/jsonl.hpp"

#include <sstream>

#include "trajprism/error.hpp"

namespace trajprism {

void read_jsonl(const std::filesystem::path& path,
                const std::function<void(std::size_t, const json&)>& fn) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidArgument("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(path.string() + ": " + e.what(), line_no);
        }
        if (!obj.is_object()) {
            throw ParseError(path.string() + ": expected a JSON object", line_no);
        }
        if (obj.contains("_schema")) {
            continue;
        }
        try {
            fn(line_no, obj);
        } catch (const json::exception& e) {
            throw ParseError(path.string() + ": " + e.what(), line_no);
        }
    }
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path, std::string_view schema)
    : out_(path) {
    if (!out_) {
        throw InvalidArgument("cannot write " + path.string());
    }
    ordered_json header;
    header["_schema"] = std::string(schema);
    header["version"] = kSchemaVersion;
    out_ << header.dump() << '\n';
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidArgument("cannot write " + path.string());
    }
    out << content;
}

} // namespace trajprism
