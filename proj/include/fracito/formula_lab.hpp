#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fracito/fbm.hpp"
#include "fracito/integrators.hpp"
#include "fracito/path_space.hpp"

namespace fracito {

enum class FormulaId {
    theorem20,        // Brownian functional Ito formula (Ito integral, 1/2 Delta_xx term)
    bm_stratonovich,  // Brownian functional Ito-Stratonovich formula
    prop43,           // Brownian: Stratonovich = Ito + 1/2 int Delta_x F phi dt
    prop45,           // fBm: Stratonovich = Ito-type
    theorem32,        // fBm functional Ito formula, Stratonovich form
    prop54,           // fBm: WIS = Stratonovich - H int Delta_x F t^{2H-1} dt
    theorem50,        // fBm functional Ito formula, WIS form
};

std::string to_string(FormulaId id);
std::optional<FormulaId> formula_from_string(const std::string& s);

// Smoothness the formula assumes of its functional.
Smoothness required_smoothness(FormulaId id);
bool formula_is_brownian(FormulaId id);

struct FormulaCase {
    FormulaId formula = FormulaId::theorem32;
    FunctionalPtr functional;
    // X driven by the noise; when empty X is the driver itself.
    std::optional<ItoProcessSpec> process;
    HurstParameter hurst{0.7};
    double horizon = 1.0;
    // Increasing resolutions, each dividing the finest. Coarse paths are
    // subsamples of one path on the finest grid (doubled when midpoints are
    // needed), so differences across the ladder are discretization effects.
    std::vector<std::size_t> ladder{256, 512, 1024, 2048};
    std::size_t paths = 1000;
    std::uint64_t seed = 1;
    std::size_t workers = 0;
    GeneratorKind generator = GeneratorKind::circulant;
};

struct NamedStatistic {
    std::string name;
    double mean = 0.0;
    double se = 0.0;
};

struct ResolutionStats {
    std::size_t n = 0;
    double rms = 0.0;
    double rms_se = 0.0;
    double mean = 0.0;
    double se = 0.0;
    double max_abs = 0.0;
    double convergence_ratio = 0.0;  // rms(n) / rms(previous n); NaN on the first row
    std::vector<NamedStatistic> extras;

    const NamedStatistic& extra(const std::string& name) const;
};

struct ResidualReport {
    FormulaId formula = FormulaId::theorem32;
    std::string functional;
    double hurst = 0.0;
    double horizon = 0.0;
    std::size_t paths = 0;
    std::vector<ResolutionStats> rows;

    // RMS never increases along the ladder, except for at most
    // `allowed_inversions` increases each within `slack_se` combined SEs.
    bool rms_nonincreasing(std::size_t allowed_inversions = 1, double slack_se = 1.0) const;
    bool rms_strictly_decreasing() const;
};

// Runs the residual pipeline named by c.formula. Throws std::invalid_argument
// when the case violates the formula's hypotheses.
ResidualReport verify(const FormulaCase& c);

ResidualReport verify_theorem20(FormulaCase c);
ResidualReport verify_bm_stratonovich_theorem(FormulaCase c);
ResidualReport verify_prop43(FormulaCase c);
ResidualReport verify_prop45(FormulaCase c);
ResidualReport verify_theorem32(FormulaCase c);
ResidualReport verify_prop54(FormulaCase c);
ResidualReport verify_theorem50(FormulaCase c);

}  // namespace fracito
