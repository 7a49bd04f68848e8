#pragma once

#include "sepeval/audio.hpp"
#include "sepeval/masks.hpp"
#include "sepeval/stft.hpp"

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sepeval {

enum class OracleKind { ibm, irm, mwf };

/// One of the oracle filtering strategies. IBM1/IBM2 are binary masks on
/// magnitudes / powers, IRM1/IRM2 are ratio masks with alpha 1 / 2, and
/// generic IRM takes any positive alpha.
struct OracleMethod {
    OracleKind kind = OracleKind::irm;
    double exponent = 2.0;  // IBM order or IRM alpha
    int iterations = 2;     // MWF only
    MwfOptions mwf;

    /// "IBM1", "IBM2", "IRM1", "IRM2", "MWF", or "IRM" with `alpha`.
    static OracleMethod parse(std::string_view name, double alpha = 2.0);
    /// Short label, e.g. "IRM2" or "IRM1.5".
    std::string label() const;
};

/// STFT every input, build the oracle mask from the true source images,
/// apply it to the mixture and resynthesize each estimate at the input length.
std::vector<AudioSignal> oracle_separate(const AudioSignal& mixture, std::span<const AudioSignal> true_sources,
                                         const OracleMethod& method, const StftConfig& config = {});

}  // namespace sepeval
