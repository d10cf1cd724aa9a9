#ifndef DHN_TRAJECTORY_HPP
#define DHN_TRAJECTORY_HPP

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dhn/core.hpp"

namespace dhn {

/**
 * @brief Sampled simulation output: named columns over uniform output steps.
 *
 * Column names carry unit suffixes (`_s`, `_C`, `_kgps`, `_Pa`, `_W`, `_J`,
 * or `_u` for dimensionless openings; `_star` marks nondimensional columns).
 * The first column is always the time axis.
 */
class Trajectory {
public:
    std::map<std::string, std::string> meta;  ///< free-form provenance (dt, seed, ...)

    void set_columns(std::vector<std::string> names) {
        if (names.empty()) throw std::invalid_argument("a trajectory needs columns");
        columns_ = std::move(names);
        index_.clear();
        for (std::size_t i = 0; i < columns_.size(); ++i) index_[columns_[i]] = i;
        if (index_.size() != columns_.size())
            throw std::invalid_argument("duplicate trajectory column names");
    }

    const std::vector<std::string>& columns() const { return columns_; }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::size_t column(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            throw std::invalid_argument("trajectory has no column '" + name + "'");
        return it->second;
    }

    void add_row(const std::vector<double>& row) {
        if (row.size() != columns_.size())
            throw std::invalid_argument("row width does not match the column count");
        data_.insert(data_.end(), row.begin(), row.end());
        ++rows_;
    }

    std::size_t rows() const { return rows_; }

    double at(std::size_t row, std::size_t col) const { return data_[row * columns_.size() + col]; }

    double at(std::size_t row, const std::string& name) const { return at(row, column(name)); }

    /** @brief Copy of one column as a vector. */
    std::vector<double> col(const std::string& name) const {
        const std::size_t c = column(name);
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, c);
        return out;
    }

    /** @brief Time axis (first column). */
    std::vector<double> time() const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, 0);
        return out;
    }

    /**
     * @brief Write as CSV.  Meta entries go first as `# key = value` lines,
     *        followed by the header row and `%.12g`-formatted values.
     */
    void save_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("cannot write trajectory file '" + path + "'");
        for (const auto& [k, v] : meta) out << "# " << k << " = " << v << "\n";
        for (std::size_t c = 0; c < columns_.size(); ++c)
            out << columns_[c] << (c + 1 < columns_.size() ? "," : "\n");
        char buf[40];
        for (std::size_t r = 0; r < rows_; ++r) {
            std::string line;
            for (std::size_t c = 0; c < columns_.size(); ++c) {
                std::snprintf(buf, sizeof buf, "%.12g", at(r, c));
                line += buf;
                line += (c + 1 < columns_.size() ? ',' : '\n');
            }
            out << line;
        }
        if (!out) throw std::runtime_error("failed while writing '" + path + "'");
    }

    static Trajectory load_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open trajectory file '" + path + "'");
        Trajectory t;
        std::string line;
        bool have_header = false;
        std::vector<double> row;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            if (line.front() == '#') {
                const auto eq = line.find('=');
                if (eq != std::string::npos) {
                    auto trim = [](std::string s) {
                        const auto b = s.find_first_not_of(" \t#");
                        const auto e = s.find_last_not_of(" \t");
                        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
                    };
                    t.meta[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
                }
                continue;
            }
            std::istringstream is(line);
            std::string cell;
            if (!have_header) {
                std::vector<std::string> names;
                while (std::getline(is, cell, ',')) names.push_back(cell);
                t.set_columns(std::move(names));
                have_header = true;
                continue;
            }
            row.clear();
            while (std::getline(is, cell, ',')) {
                double v = 0.0;
                const char* b = cell.data();
                auto res = std::from_chars(b, b + cell.size(), v);
                if (res.ec != std::errc() || res.ptr != b + cell.size())
                    throw std::runtime_error(path + ": bad numeric cell '" + cell + "'");
                row.push_back(v);
            }
            t.add_row(row);
        }
        if (!have_header) throw std::runtime_error(path + ": no header row");
        return t;
    }

private:
    std::vector<std::string> columns_;
    std::map<std::string, std::size_t> index_;
    std::vector<double> data_;
    std::size_t rows_ = 0;
};

}  // namespace dhn

#endif  // DHN_TRAJECTORY_HPP
