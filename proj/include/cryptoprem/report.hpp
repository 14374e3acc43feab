#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cryptoprem/csv.hpp"
#include "cryptoprem/error.hpp"
#include "cryptoprem/fama_macbeth.hpp"
#include "cryptoprem/panel.hpp"
#include "cryptoprem/premia.hpp"

namespace cryptoprem {

inline constexpr double kWeeksPerYear = 52.0;

/// Simple (non-compounded) annualization of a weekly percent figure.
inline double annualize(double weekly_pct) { return kWeeksPerYear * weekly_pct; }

struct PremiaRow {
    std::string factor;
    double tp_lambda = kNaN;
    double tp_pvalue = kNaN;
    Stars tp_stars = Stars::none;
    double fm_lambda = kNaN;
    double fm_pvalue = kNaN;
    Stars fm_stars = Stars::none;
};

/// Side-by-side premia, rows ordered by three-pass p-value (ascending, unset
/// last, ties alphabetical).
struct PremiaTable {
    std::vector<PremiaRow> rows;
};

inline PremiaTable render_premia(const RiskPremiaEstimate& three_pass,
                                 const RiskPremiaEstimate& fama_macbeth) {
    auto sorted_names = [](std::vector<std::string> v) {
        std::sort(v.begin(), v.end());
        return v;
    };
    if (sorted_names(three_pass.factor_names) != sorted_names(fama_macbeth.factor_names)) {
        throw DataError("premia tables list different factors");
    }
    auto p_of = [](const RiskPremiaEstimate& e, Index j) {
        return e.pvalues.size() ? e.pvalues(j) : kNaN;
    };
    PremiaTable table;
    for (std::size_t j = 0; j < three_pass.factor_names.size(); ++j) {
        PremiaRow row;
        row.factor = three_pass.factor_names[j];
        row.tp_lambda = three_pass.lambda(static_cast<Index>(j));
        row.tp_pvalue = p_of(three_pass, static_cast<Index>(j));
        row.tp_stars = stars_for(row.tp_pvalue);
        const auto k = std::find(fama_macbeth.factor_names.begin(), fama_macbeth.factor_names.end(),
                                 row.factor) -
                       fama_macbeth.factor_names.begin();
        row.fm_lambda = fama_macbeth.lambda(k);
        row.fm_pvalue = p_of(fama_macbeth, k);
        row.fm_stars = stars_for(row.fm_pvalue);
        table.rows.push_back(std::move(row));
    }
    std::sort(table.rows.begin(), table.rows.end(), [](const PremiaRow& a, const PremiaRow& b) {
        const bool na = std::isnan(a.tp_pvalue);
        const bool nb = std::isnan(b.tp_pvalue);
        if (na != nb) return nb;
        if (!na && a.tp_pvalue != b.tp_pvalue) return a.tp_pvalue < b.tp_pvalue;
        return a.factor < b.factor;
    });
    return table;
}

inline PremiaTable render_premia(const RiskPremiaEstimate& three_pass, const FMResult& fm) {
    return render_premia(three_pass, to_estimate(fm));
}

namespace detail {

inline std::string fixed_or_blank(double x, int decimals) {
    return std::isnan(x) ? std::string{} : fmt::format("{:.{}f}", x, decimals);
}

}  // namespace detail

inline std::string premia_markdown(const PremiaTable& table) {
    std::string out =
        "| Factor | Three-pass | p-value | Annualized | Fama-MacBeth | p-value | Annualized |\n"
        "|:--|--:|--:|--:|--:|--:|--:|\n";
    for (const auto& r : table.rows) {
        out += fmt::format("| {} | {}{} | {} | {} | {}{} | {} | {} |\n", r.factor,
                           detail::fixed_or_blank(r.tp_lambda, 3), stars_text(r.tp_stars),
                           detail::fixed_or_blank(r.tp_pvalue, 3),
                           detail::fixed_or_blank(annualize(r.tp_lambda), 1),
                           detail::fixed_or_blank(r.fm_lambda, 3), stars_text(r.fm_stars),
                           detail::fixed_or_blank(r.fm_pvalue, 3),
                           detail::fixed_or_blank(annualize(r.fm_lambda), 1));
    }
    out +=
        "\nPremia are weekly percent per unit of factor exposure; annualized figures are 52 x "
        "weekly.\n"
        "Three-pass p-values are recentered moving-block bootstrap p-values; Fama-MacBeth "
        "p-values use Shanken-corrected standard errors.\n"
        "***, **, * denote p < 0.01, 0.05, 0.10.\n";
    return out;
}

inline std::string premia_table_csv(const PremiaTable& table) {
    std::string out =
        "factor,three_pass_lambda,three_pass_pvalue,three_pass_stars,three_pass_annualized,"
        "fama_macbeth_lambda,fama_macbeth_pvalue,fama_macbeth_stars,fama_macbeth_annualized\n";
    auto num = [](double x) { return std::isnan(x) ? std::string{} : csv::number(x); };
    for (const auto& r : table.rows) {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.factor, num(r.tp_lambda),
                           num(r.tp_pvalue), stars_text(r.tp_stars), num(annualize(r.tp_lambda)),
                           num(r.fm_lambda), num(r.fm_pvalue), stars_text(r.fm_stars),
                           num(annualize(r.fm_lambda)));
    }
    return out;
}

struct DescriptiveRow {
    std::string name;
    std::size_t count = 0;
    StatsRow stats;
    bool degenerate = false;  // constant series: only count and mean are meaningful
};

inline std::vector<DescriptiveRow> describe_all(const std::vector<SeriesFrame>& series) {
    std::vector<DescriptiveRow> rows;
    for (const auto& s : series) {
        DescriptiveRow row{s.name, s.size(), {}, false};
        try {
            row.stats = describe(s);
        } catch (const NumericalError&) {
            row.degenerate = true;
            row.stats.mean = sample_mean(s.values);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string descriptives_csv(const std::vector<DescriptiveRow>& rows) {
    std::string out = "series,count,mean,std,min,q25,median,q75,max,skewness,kurtosis\n";
    for (const auto& r : rows) {
        const auto& s = r.stats;
        if (r.degenerate) {
            out += fmt::format("{},{},{},,,,,,,,\n", r.name, r.count, csv::number(s.mean));
            continue;
        }
        out += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.name, r.count,
                           csv::number(s.mean), csv::number(s.std), csv::number(s.min),
                           csv::number(s.q25), csv::number(s.median), csv::number(s.q75),
                           csv::number(s.max), csv::number(s.skewness),
                           csv::number(s.kurtosis_fisher));
    }
    return out;
}

/// Descriptive table in the layout of the published tables: one column per
/// series, statistics down the rows, two decimals.
inline std::string descriptives_markdown(const std::vector<DescriptiveRow>& rows) {
    std::string out = "| |";
    std::string rule = "|:--|";
    for (const auto& r : rows) {
        out += " " + r.name + " |";
        rule += "--:|";
    }
    out += "\n" + rule + "\n";
    const std::vector<std::pair<std::string, double StatsRow::*>> fields = {
        {"mean", &StatsRow::mean},     {"std", &StatsRow::std},
        {"min", &StatsRow::min},       {"25%", &StatsRow::q25},
        {"50%", &StatsRow::median},    {"75%", &StatsRow::q75},
        {"max", &StatsRow::max},       {"Skewness", &StatsRow::skewness},
        {"Kurtosis", &StatsRow::kurtosis_fisher}};
    out += "| count |";
    for (const auto& r : rows) out += fmt::format(" {} |", r.count);
    out += '\n';
    for (const auto& [label, member] : fields) {
        out += "| " + label + " |";
        for (const auto& r : rows) {
            const bool blank = r.degenerate && member != &StatsRow::mean;
            out += " " + (blank ? std::string{} : fmt::format("{:.2f}", r.stats.*member)) + " |";
        }
        out += '\n';
    }
    return out;
}

}  // namespace cryptoprem
