#pragma once

#include <string>

namespace zeresfdg {

// Which guidance branch a step takes. CFGZeroFD projects the conditional onto
// the unconditional and guides with the filtered residual; RescaleFDG guides
// with the reweighted raw delta and rescales the result's energy.
enum class GuidanceMode {
    CFGZeroFD,
    RescaleFDG,
};

const char* mode_name(GuidanceMode m);
GuidanceMode mode_from_name(const std::string& name);

struct GuidanceConfig {
    double scale = 4.5;           // guidance strength applied to the reweighted delta
    double alpha_rescale = 0.7;   // blend between rescaled and raw guided output, [0, 1]
    double lambda_low = 0.6;      // low-band gain, [0, 1]
    double lambda_high = 1.3;     // high-band gain, >= 1
    double sigma_split = 1.0;     // gaussian sigma separating the bands, > 0
    double beta_ema = 0.8;        // controller smoothing factor, (0, 1)
    double tau_lo = 0.45;         // switch down to CFGZeroFD at rho <= tau_lo
    double tau_hi = 0.60;         // switch up to RescaleFDG at rho >= tau_hi
    bool rescale_recenters = false;  // rescale about the per-sample mean instead of zero
    bool invert_mode_map = false;    // swap which side of the band maps to which mode

    // Throws ConfigError naming the offending field(s) on any range violation.
    void validate() const;
};

}  // namespace zeresfdg
