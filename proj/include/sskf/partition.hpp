#pragma once

#include <algorithm>
#include <compare>
#include <cstdio>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sskf/errors.hpp"

namespace sskf {

/// A (variable, subgroup) pair. Both indices are zero-based; the label shown
/// in reports is `group + 1`.
struct HypothesisId {
    std::size_t variable = 0;
    std::size_t group = 0;

    auto operator<=>(const HypothesisId&) const = default;
};

/// One covariate used to split the population for a variable. A covariate
/// value above `threshold` maps to bit 1.
struct CovariateSplit {
    std::size_t covariate = 0;
    double threshold = 0.5;
    bool binary = true;

    bool operator==(const CovariateSplit&) const = default;
};

/// Per-variable map from covariate configurations to subgroup labels.
///
/// Variable j splits on the covariates in `splits(j)` (ascending covariate
/// index). Group index = binary number formed by the split bits with the first
/// covariate as the most significant bit, so for two covariates the labels are
/// (0,0)->1, (0,1)->2, (1,0)->3, (1,1)->4.
class PartitionFunction {
public:
    PartitionFunction() = default;

    PartitionFunction(std::vector<std::vector<CovariateSplit>> splits,
                      std::vector<std::string> covariate_names)
        : splits_(std::move(splits)), names_(std::move(covariate_names)) {
        for (auto& s : splits_) {
            for (std::size_t k = 1; k < s.size(); ++k) {
                if (s[k - 1].covariate >= s[k].covariate)
                    throw ParameterError("partition covariates must be strictly ascending");
            }
            if (s.size() > 20) throw ParameterError("too many covariates in one partition");
        }
    }

    /// One group ("All individuals") for every variable.
    static PartitionFunction trivial(std::size_t p, std::vector<std::string> covariate_names = {}) {
        return PartitionFunction(std::vector<std::vector<CovariateSplit>>(p), std::move(covariate_names));
    }

    std::size_t variables() const { return splits_.size(); }

    const std::vector<CovariateSplit>& splits(std::size_t j) const {
        check_variable(j);
        return splits_[j];
    }

    std::size_t groups(std::size_t j) const { return std::size_t{1} << splits(j).size(); }

    std::size_t total_groups() const {
        std::size_t total = 0;
        for (std::size_t j = 0; j < variables(); ++j) total += groups(j);
        return total;
    }

    std::size_t max_groups() const {
        std::size_t g = 1;
        for (std::size_t j = 0; j < variables(); ++j) g = std::max(g, groups(j));
        return g;
    }

    bool is_trivial(std::size_t j) const { return splits(j).empty(); }

    /// Group index of a covariate vector for variable j.
    std::size_t group_of(std::size_t j, std::span<const double> z) const {
        std::size_t g = 0;
        for (const auto& s : splits(j)) {
            if (s.covariate >= z.size()) throw IndexError("covariate index outside the covariate vector");
            g = (g << 1) | (z[s.covariate] > s.threshold ? 1u : 0u);
        }
        return g;
    }

    /// Split bits that define group g, in the order of `splits(j)`.
    std::vector<int> configuration(std::size_t j, std::size_t g) const {
        check_group(j, g);
        const auto& s = splits(j);
        std::vector<int> bits(s.size());
        for (std::size_t k = 0; k < s.size(); ++k) bits[k] = static_cast<int>((g >> (s.size() - 1 - k)) & 1u);
        return bits;
    }

    const std::vector<std::string>& covariate_names() const { return names_; }

    std::string covariate_name(std::size_t l) const {
        if (l < names_.size()) return names_[l];
        return "Z" + std::to_string(l + 1);
    }

    /// Human-readable subgroup, e.g. "Resident : 0 and Male : 1".
    std::string definition(std::size_t j, std::size_t g) const {
        const auto& s = splits(j);
        if (s.empty()) return "All individuals";
        const auto bits = configuration(j, g);
        std::string out;
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (k > 0) out += " and ";
            out += covariate_name(s[k].covariate);
            if (s[k].binary) {
                out += " : " + std::to_string(bits[k]);
            } else {
                out += bits[k] ? " > " : " <= ";
                out += format_threshold(s[k].threshold);
            }
        }
        return out;
    }

    bool valid(const HypothesisId& id) const { return id.variable < variables() && id.group < groups(id.variable); }

    void check_group(std::size_t j, std::size_t g) const {
        check_variable(j);
        if (g >= groups(j)) throw IndexError("group " + std::to_string(g) + " out of range for variable " + std::to_string(j));
    }

    /// Every (j, g) pair ordered by variable then group.
    std::vector<HypothesisId> hypotheses() const {
        std::vector<HypothesisId> ids;
        for (std::size_t j = 0; j < variables(); ++j)
            for (std::size_t g = 0; g < groups(j); ++g) ids.push_back({j, g});
        return ids;
    }

    nlohmann::json to_json() const {
        nlohmann::json vars = nlohmann::json::array();
        for (std::size_t j = 0; j < variables(); ++j) {
            nlohmann::json covs = nlohmann::json::array();
            for (const auto& s : splits_[j]) {
                covs.push_back({{"index", s.covariate},
                                {"name", covariate_name(s.covariate)},
                                {"threshold", s.threshold},
                                {"binary", s.binary}});
            }
            nlohmann::json labels = nlohmann::json::array();
            for (std::size_t g = 0; g < groups(j); ++g)
                labels.push_back({{"label", g + 1}, {"configuration", configuration(j, g)}, {"definition", definition(j, g)}});
            vars.push_back({{"variable", j + 1}, {"covariates", covs}, {"groups", labels}});
        }
        return {{"covariate_names", names_}, {"variables", vars}};
    }

    static PartitionFunction from_json(const nlohmann::json& doc) {
        std::vector<std::vector<CovariateSplit>> splits;
        for (const auto& v : doc.at("variables")) {
            std::vector<CovariateSplit> s;
            for (const auto& c : v.at("covariates"))
                s.push_back({c.at("index").get<std::size_t>(), c.at("threshold").get<double>(), c.at("binary").get<bool>()});
            splits.push_back(std::move(s));
        }
        return PartitionFunction(std::move(splits), doc.value("covariate_names", std::vector<std::string>{}));
    }

    bool operator==(const PartitionFunction&) const = default;

private:
    void check_variable(std::size_t j) const {
        if (j >= splits_.size()) throw IndexError("variable " + std::to_string(j) + " out of range");
    }

    static std::string format_threshold(double t) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g", t);
        return buf;
    }

    std::vector<std::vector<CovariateSplit>> splits_;
    std::vector<std::string> names_;
};

}  // namespace sskf
