#include "evgrid/csv.hpp"

#include "evgrid/common.hpp"

#include <charconv>
#include <sstream>

namespace evgrid {

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& context, std::size_t lineno) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(field);
            field.clear();
        } else {
            field.push_back(c);
        }
    }
    if (quoted)
        throw ParseError(context + ":" + std::to_string(lineno) + ": unterminated quote");
    out.push_back(field);
    return out;
}

} // namespace

CsvTable parse_csv(const std::string& text, const std::string& context) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_line(line, context, lineno);
        if (t.header.empty()) {
            t.header = std::move(fields);
        } else {
            if (fields.size() != t.header.size())
                throw ParseError(context + ":" + std::to_string(lineno) + ": expected " +
                                 std::to_string(t.header.size()) + " fields, got " +
                                 std::to_string(fields.size()));
            t.rows.push_back(std::move(fields));
        }
    }
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path.string());
}

std::string fmt_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : out_(path) {
    if (!out_) throw ConfigError("cannot write " + path.string());
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        const std::string& f = fields[i];
        if (f.find_first_of(",\"\n") != std::string::npos) {
            out_ << '"';
            for (char c : f) {
                if (c == '"') out_ << "\"\"";
                else out_ << c;
            }
            out_ << '"';
        } else {
            out_ << f;
        }
    }
    out_ << '\n';
}

void CsvWriter::comment(const std::string& text) { out_ << "# " << text << '\n'; }

} // namespace evgrid
