#include "closedobs/embedding.hpp"

#include "closedobs/error.hpp"

namespace closedobs {

DelayVectorSet delay_embed(const TrajectoryBundle &bundle, std::size_t T) {
    if (T < 1) throw Error(ErrorCode::invalid_argument, "delay horizon T must be >= 1");
    bundle.validate();

    std::size_t rows = 0;
    for (std::size_t i = 0; i < bundle.trajectories.size(); ++i) {
        const std::size_t L = bundle.trajectories[i].length();
        if (L < T + 1)
            throw Error(ErrorCode::too_short,
                        "trajectory " + std::to_string(i) + " has " + std::to_string(L) +
                            " observations; delay horizon " + std::to_string(T) + " needs at least " +
                            std::to_string(T + 1));
        rows += L - T + 1;
    }

    DelayVectorSet set;
    set.T = T;
    set.m = bundle.m;
    set.dt = bundle.dt;
    set.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(T * bundle.m));
    set.source.reserve(rows);
    set.successor.reserve(rows);

    Eigen::Index r = 0;
    for (std::size_t i = 0; i < bundle.trajectories.size(); ++i) {
        const auto &obs = bundle.trajectories[i].observations;
        const std::size_t count = obs.size() - T + 1;
        set.first_row.push_back(static_cast<std::size_t>(r));
        for (std::size_t k = 0; k < count; ++k, ++r) {
            for (std::size_t j = 0; j < T; ++j)
                for (std::size_t c = 0; c < bundle.m; ++c)
                    set.values(r, static_cast<Eigen::Index>(j * bundle.m + c)) = obs[k + j][c];
            set.source.push_back({i, k});
            set.successor.push_back(k + 1 < count ? r + 1 : -1);
        }
    }
    return set;
}

} // namespace closedobs
