#include "jlvae/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jlvae/error.hpp"

namespace jlvae {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const double* row = m.row_ptr(i);
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ',';
            out << format_double(row[j]);
        }
        out << '\n';
    }
}

Matrix read_matrix_csv(std::istream& in) {
    std::vector<double> data;
    std::size_t rows = 0, cols = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (cols == 0) {
            cols = fields.size();
        } else if (fields.size() != cols) {
            throw IoError("matrix csv: ragged row at line " + std::to_string(rows + 1));
        }
        for (const auto& f : fields) {
            std::size_t consumed = 0;
            double v;
            try {
                v = std::stod(f, &consumed);
            } catch (const std::exception&) {
                throw IoError("matrix csv: bad number '" + f + "'");
            }
            if (consumed != f.size()) throw IoError("matrix csv: bad number '" + f + "'");
            data.push_back(v);
        }
        ++rows;
    }
    return Matrix(rows, cols, std::move(data));
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw IoError("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fnv1a_hex(const void* bytes, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fnv1a_hex(const std::string& text) { return fnv1a_hex(text.data(), text.size()); }

}  // namespace jlvae
