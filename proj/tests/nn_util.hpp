#pragma once

#include <torch/torch.h>

#include "oarseg/models.hpp"

// c10 logging defines CHECK as a fatal assertion; restore the doctest macros.
#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE
#define CHECK DOCTEST_CHECK
#define CHECK_EQ DOCTEST_CHECK_EQ
#define CHECK_NE DOCTEST_CHECK_NE
#define CHECK_LT DOCTEST_CHECK_LT
#define CHECK_LE DOCTEST_CHECK_LE
#define CHECK_GT DOCTEST_CHECK_GT
#define CHECK_GE DOCTEST_CHECK_GE

inline bool same_parameters(const torch::nn::Module& a, const torch::nn::Module& b) {
    const auto pa = a.named_parameters(), pb = b.named_parameters();
    if (pa.size() != pb.size()) return false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i].key() != pb[i].key()) return false;
        if (!torch::equal(pa[i].value(), pb[i].value())) return false;
    }
    return true;
}

inline oarseg::nn::GeneratorConfig tiny_generator() {
    oarseg::nn::GeneratorConfig c;
    c.depth = 2;
    c.base_channels = 4;
    c.se_reduction = 2;
    return c;
}

inline oarseg::nn::DiscriminatorConfig tiny_critic() { return {{4, 4, 8, 8}, 0.2}; }
