#pragma once

#include <random>
#include <vector>

#include <gsrl/gsrl.hpp>

namespace testing_support {

using gsrl::Index;
using gsrl::Matrix;
using gsrl::Vector;

inline Matrix random_matrix(Index n, Index p, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Matrix m(n, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) m(i, j) = normal(rng);
    return m;
}

/// Group sizes drawn from {1, 2, 3, 4} until they add up to p.
inline gsrl::GroupPartition mixed_partition(Index p, std::mt19937_64& rng)
{
    std::vector<Index> sizes;
    Index used = 0;
    while (used < p) {
        const Index s = std::min<Index>(p - used, 1 + static_cast<Index>(rng() % 4));
        sizes.push_back(s);
        used += s;
    }
    return gsrl::GroupPartition::contiguous(sizes);
}

/// Y = X beta0 + noise with the first few groups active.
inline gsrl::GsrlProblem random_problem(Index n, Index p, std::uint64_t seed, double noise = 1.0)
{
    std::mt19937_64 rng(seed);
    auto part = mixed_partition(p, rng);
    Matrix X = random_matrix(n, p, rng());
    Vector beta0 = Vector::Zero(p);
    const Index active = std::min<Index>(3, part.num_groups());
    std::normal_distribution<double> normal;
    for (Index j = 0; j < active; ++j)
        for (Index i : part.group(j)) beta0(i) = 2.0 + normal(rng);
    Vector Y = X * beta0;
    for (Index i = 0; i < n; ++i) Y(i) += noise * normal(rng);
    return gsrl::GsrlProblem(std::move(X), std::move(Y), std::move(part));
}

} // namespace testing_support
