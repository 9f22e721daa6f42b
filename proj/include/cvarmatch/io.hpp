#pragma once

// Instance dump: a directory holding
//   X.csv, X_sharp.csv  d lines of T comma-separated values (%.17g, exact round trip)
//   meta.json           {"d", "T", "sigma", "theta", "seed", "pi_star" (1-based), "A_star" (rows)}

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvarmatch/errors.hpp"
#include "cvarmatch/harness.hpp"
#include "cvarmatch/model.hpp"

namespace cvarmatch {

namespace detail {

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline std::string matrix_to_csv(const Matrix& m) {
    std::string out;
    char buf[40];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
            if (j) out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

inline Matrix matrix_from_csv(const std::string& path, int rows, int cols) {
    std::istringstream in(read_text_file(path));
    Matrix m(rows, cols);
    std::string line;
    for (int i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw IoError("'" + path + "': expected " + std::to_string(rows) + " rows");
        std::istringstream ls(line);
        std::string cell;
        int j = 0;
        while (std::getline(ls, cell, ',')) {
            if (j >= cols) throw IoError("'" + path + "': too many columns in row " + std::to_string(i + 1));
            try {
                m(i, j++) = std::stod(cell);
            } catch (const std::logic_error&) {
                throw IoError("'" + path + "': malformed number in row " + std::to_string(i + 1));
            }
        }
        if (j != cols) throw IoError("'" + path + "': expected " + std::to_string(cols) + " columns");
    }
    return m;
}

}  // namespace detail

inline void save_instance(const CvarInstance& inst, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
    detail::write_text_file(fs::path(dir) / "X.csv", detail::matrix_to_csv(inst.X));
    detail::write_text_file(fs::path(dir) / "X_sharp.csv", detail::matrix_to_csv(inst.X_sharp));

    nlohmann::json meta;
    meta["d"] = inst.d();
    meta["T"] = inst.T();
    meta["sigma"] = inst.sigma;
    meta["theta"] = inst.theta;
    meta["seed"] = inst.seed;
    meta["pi_star"] = inst.pi_star.one_based();
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < inst.A_star.matrix().rows(); ++i) {
        std::vector<double> row(inst.A_star.matrix().cols());
        for (Eigen::Index j = 0; j < inst.A_star.matrix().cols(); ++j) row[j] = inst.A_star.matrix()(i, j);
        rows.push_back(row);
    }
    meta["A_star"] = rows;
    detail::write_text_file(fs::path(dir) / "meta.json", meta.dump(2) + "\n");
}

/// Reads a dump written by save_instance. X_tilde is not stored and comes back empty.
inline CvarInstance load_instance(const std::string& dir) {
    namespace fs = std::filesystem;
    const std::string meta_path = (fs::path(dir) / "meta.json").string();
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_text_file(meta_path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + meta_path + "': " + e.what());
    }
    try {
        CvarInstance inst;
        const int d = meta.at("d").get<int>();
        const int T = meta.at("T").get<int>();
        inst.sigma = meta.at("sigma").get<double>();
        inst.theta = meta.at("theta").get<double>();
        inst.seed = meta.at("seed").get<std::uint64_t>();
        inst.pi_star = Permutation::from_one_based(meta.at("pi_star").get<std::vector<int>>());
        const auto rows = meta.at("A_star").get<std::vector<std::vector<double>>>();
        Matrix a(d, d);
        if (static_cast<int>(rows.size()) != d) throw IoError("'" + meta_path + "': A_star must be d x d");
        for (int i = 0; i < d; ++i) {
            if (static_cast<int>(rows[i].size()) != d) throw IoError("'" + meta_path + "': A_star must be d x d");
            for (int j = 0; j < d; ++j) a(i, j) = rows[i][j];
        }
        inst.A_star = SystemMatrix(a);
        if (inst.pi_star.size() != T) throw IoError("'" + meta_path + "': pi_star must have T entries");
        inst.X = detail::matrix_from_csv((fs::path(dir) / "X.csv").string(), d, T);
        inst.X_sharp = detail::matrix_from_csv((fs::path(dir) / "X_sharp.csv").string(), d, T);
        return inst;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + meta_path + "': " + e.what());
    }
}

}  // namespace cvarmatch
