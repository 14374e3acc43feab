#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "cryptoprem/csv.hpp"
#include "cryptoprem/error.hpp"
#include "cryptoprem/panel.hpp"

namespace cryptoprem {

enum class Method { three_pass, fama_macbeth };

inline std::string to_string(Method m) {
    return m == Method::three_pass ? "three_pass" : "fama_macbeth";
}

inline Method method_from_string(std::string_view s) {
    if (s == "three_pass") return Method::three_pass;
    if (s == "fama_macbeth") return Method::fama_macbeth;
    throw ConfigError(fmt::format("unknown method '{}'", s));
}

/// Significance marker: *** p < 0.01, ** p < 0.05, * p < 0.10 (strict).
enum class Stars { none, p10, p5, p1 };

inline Stars stars_for(double p) {
    if (!(p < 0.10)) return Stars::none;  // also NaN
    if (p < 0.01) return Stars::p1;
    if (p < 0.05) return Stars::p5;
    return Stars::p10;
}

inline std::string stars_text(Stars s) {
    switch (s) {
        case Stars::p1: return "***";
        case Stars::p5: return "**";
        case Stars::p10: return "*";
        case Stars::none: return "";
    }
    return "";
}

/// Per-factor prices of risk in weekly percent per unit exposure.
struct RiskPremiaEstimate {
    std::vector<std::string> factor_names;
    VectorXd lambda;  // L
    VectorXd gamma;   // K latent prices of risk; empty for Fama-MacBeth
    Method method = Method::three_pass;
    VectorXd pvalues;  // NaN until inference has run
    std::vector<Stars> stars;
    std::vector<std::string> warnings;

    void set_pvalues(const VectorXd& p) {
        if (p.size() != lambda.size()) throw DataError("p-value vector length mismatch");
        pvalues = p;
        stars.clear();
        for (Index j = 0; j < p.size(); ++j) stars.push_back(stars_for(p(j)));
    }

    void clear_pvalues() { set_pvalues(VectorXd::Constant(lambda.size(), kNaN)); }
};

/// `factor,lambda_weekly_pct,pvalue,stars`; an unset p-value is a blank cell.
inline void write_premia_csv(const RiskPremiaEstimate& est, const std::filesystem::path& path) {
    std::string out = "factor,lambda_weekly_pct,pvalue,stars\n";
    for (std::size_t j = 0; j < est.factor_names.size(); ++j) {
        const auto J = static_cast<Index>(j);
        const double p = est.pvalues.size() ? est.pvalues(J) : kNaN;
        out += fmt::format("{},{},{},{}\n", est.factor_names[j], csv::number(est.lambda(J)),
                           std::isnan(p) ? std::string{} : csv::number(p),
                           stars_text(stars_for(p)));
    }
    csv::write_text(path, out);
}

inline RiskPremiaEstimate read_premia_csv(const std::filesystem::path& path, Method method) {
    const auto table = csv::read(path);
    const auto cf = table.column("factor");
    const auto cl = table.column("lambda_weekly_pct");
    const auto cp = table.column("pvalue");
    if (cf < 0 || cl < 0 || cp < 0) throw DataError(path.string() + ": unexpected premia header");
    RiskPremiaEstimate est;
    est.method = method;
    const auto L = static_cast<Index>(table.rows.size());
    est.lambda.resize(L);
    VectorXd p = VectorXd::Constant(L, kNaN);
    for (Index j = 0; j < L; ++j) {
        const auto& row = table.rows[j];
        est.factor_names.push_back(row[cf]);
        double v = 0;
        if (!csv::parse_number(row[cl], v, path.string() + " " + row[cf])) {
            throw DataError(path.string() + ": missing lambda for " + row[cf]);
        }
        est.lambda(j) = v;
        if (csv::parse_number(row[cp], v, path.string() + " " + row[cf])) p(j) = v;
    }
    est.set_pvalues(p);
    return est;
}

}  // namespace cryptoprem
