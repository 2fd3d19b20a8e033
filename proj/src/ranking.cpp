#include "cascade/ranking.hpp"

namespace cascade {

std::string_view to_string(Stage stage)
{
    switch (stage) {
    case Stage::Sparse: return "sparse";
    case Stage::Dense: return "dense";
    case Stage::Fused: return "fused";
    case Stage::Mono: return "mono";
    case Stage::Duo: return "duo";
    case Stage::Ensemble: return "ensemble";
    }
    return "unknown";
}

}  // namespace cascade
