#pragma once

#include <string>

#include "threshcox/biasatlas.hpp"
#include "threshcox/estimators.hpp"
#include "threshcox/simharness.hpp"

namespace threshcox {

/// FitResult as a JSON string (round-trips losslessly through parse_fit_result).
std::string fit_result_to_json(const FitResult& fr);
FitResult parse_fit_result(const std::string& json_text);

/// Text table, one row per parameter: estimate(SE), two-sided Wald p-value,
/// 95% CI of exp(coefficient). tau gets estimate(SE) only (no exp scale).
std::string render_fit_table(const std::vector<FitResult>& fits);

/// BiasTable renderings: CSV (method x parameter cells) and aligned text.
std::string bias_table_csv(const BiasTable& table);
std::string bias_table_text(const BiasTable& table);

/// Atlas CSV: theoretical / empirical / DELTA / converged columns.
std::string atlas_csv(const std::vector<AtlasCell>& cells);

/// Reproducibility manifest: FNV-1a hash of the config text, the seed, and
/// library version.
std::string manifest_json(const std::string& config_text, std::uint64_t seed);

/// Two-sided normal p-value for estimate/se.
double wald_pvalue(double estimate, double se);

}  // namespace threshcox
