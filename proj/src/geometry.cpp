#include "parapot/geometry.hpp"

#include <cmath>

namespace parapot {

double unit_ball_volume(int N) {
    if (N < 1) throw std::invalid_argument("unit_ball_volume: N must be >= 1");
    return std::pow(M_PI, 0.5 * N) / std::tgamma(0.5 * N + 1.0);
}

}  // namespace parapot
