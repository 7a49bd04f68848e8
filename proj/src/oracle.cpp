#include "sepeval/oracle.hpp"

#include "sepeval/error.hpp"

#include <cmath>
#include <sstream>

namespace sepeval {

OracleMethod OracleMethod::parse(std::string_view name, double alpha) {
    OracleMethod m;
    if (name == "IBM1" || name == "IBM2") {
        m.kind = OracleKind::ibm;
        m.exponent = name == "IBM1" ? 1.0 : 2.0;
    } else if (name == "IRM1" || name == "IRM2") {
        m.kind = OracleKind::irm;
        m.exponent = name == "IRM1" ? 1.0 : 2.0;
    } else if (name == "IRM") {
        if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("IRM alpha must be positive");
        m.kind = OracleKind::irm;
        m.exponent = alpha;
    } else if (name == "MWF") {
        m.kind = OracleKind::mwf;
    } else {
        throw ConfigError("unknown oracle method '" + std::string(name) + "' (expected IBM1, IBM2, IRM1, IRM2, IRM, MWF)");
    }
    return m;
}

std::string OracleMethod::label() const {
    switch (kind) {
        case OracleKind::ibm: return exponent == 1.0 ? "IBM1" : "IBM2";
        case OracleKind::mwf: return "MWF";
        case OracleKind::irm: {
            std::ostringstream os;
            os << "IRM" << exponent;
            return os.str();
        }
    }
    return "unknown";
}

std::vector<AudioSignal> oracle_separate(const AudioSignal& mixture, std::span<const AudioSignal> true_sources,
                                         const OracleMethod& method, const StftConfig& config) {
    if (true_sources.empty()) throw ShapeError("oracle_separate: no sources");
    for (const auto& s : true_sources) require_same_shape(mixture, s, "oracle_separate");

    const Spectrogram x = stft(mixture, config);
    SourceImages images;
    images.images.reserve(true_sources.size());
    for (const auto& s : true_sources) images.images.push_back(stft(s, config));

    std::vector<Spectrogram> estimates;
    switch (method.kind) {
        case OracleKind::ibm:
            estimates = ibm_separate(images, x, static_cast<int>(method.exponent));
            break;
        case OracleKind::irm:
            estimates = irm_separate(images, x, method.exponent);
            break;
        case OracleKind::mwf: {
            const SpatialModel model = estimate_mwf_model(images, method.iterations);
            images.images.clear();
            estimates = mwf_separate(model, x, method.mwf);
            break;
        }
    }

    const auto length = static_cast<std::size_t>(mixture.length());
    std::vector<AudioSignal> out;
    out.reserve(estimates.size());
    for (const auto& e : estimates) out.push_back(istft(e, length));
    return out;
}

}  // namespace sepeval
