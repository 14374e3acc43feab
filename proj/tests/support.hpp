#pragma once

// Shared test helpers: scratch directories, seeded generators and oracles
// computed independently of the library code paths.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "cryptoprem/cryptoprem.hpp"

namespace testing_support {

using cryptoprem::Index;
using cryptoprem::MatrixXd;
using cryptoprem::VectorXd;

inline std::filesystem::path source_dir() { return CRYPTOPREM_SOURCE_DIR; }

/// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("cryptoprem_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    cryptoprem::csv::write_text(p, text);
}

inline MatrixXd normal_matrix(Index r, Index c, std::mt19937_64& gen, double sd = 1.0) {
    std::normal_distribution<double> z(0.0, sd);
    MatrixXd m(r, c);
    for (Index j = 0; j < c; ++j)
        for (Index i = 0; i < r; ++i) m(i, j) = z(gen);
    return m;
}

/// OLS by normal equations, a different route from the library's pivoted QR.
inline MatrixXd normal_equations(const MatrixXd& X, const MatrixXd& Y) {
    return (X.transpose() * X).ldlt().solve(X.transpose() * Y);
}

inline MatrixXd add_constant(const MatrixXd& X) {
    MatrixXd out(X.rows(), X.cols() + 1);
    out.col(0).setOnes();
    out.rightCols(X.cols()) = X;
    return out;
}

/// Pearson correlation.
inline double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) { ma += a[i]; mb += b[i]; }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline cryptoprem::SeriesFrame frame(const std::vector<double>& v, const std::string& name = "x",
                                     cryptoprem::Date start = cryptoprem::parse_date("2023-01-01")) {
    cryptoprem::SeriesFrame f{{}, name, v, cryptoprem::Unit::percent};
    for (std::size_t t = 0; t < v.size(); ++t) f.time_index.push_back(cryptoprem::add_weeks(start, static_cast<int>(t)));
    return f;
}

inline cryptoprem::FactorSet factor_set(const MatrixXd& values, cryptoprem::Date start = cryptoprem::parse_date("2023-01-01")) {
    cryptoprem::FactorSet G;
    for (Index t = 0; t < values.rows(); ++t) G.time_index.push_back(cryptoprem::add_weeks(start, static_cast<int>(t)));
    for (Index j = 0; j < values.cols(); ++j) {
        G.names.push_back("g" + std::to_string(j + 1));
        G.kinds.push_back(cryptoprem::FactorKind::tradable);
        G.units.push_back(cryptoprem::Unit::percent);
    }
    G.values = values;
    return G;
}

}  // namespace testing_support
