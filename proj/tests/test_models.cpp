#include <doctest.h>

#include "oarseg/checkpoint.hpp"
#include "oarseg/models.hpp"
#include "nn_util.hpp"
#include "test_util.hpp"

using namespace oarseg::nn;

TEST_CASE("generator preserves spatial shape") {
    auto g = build_generator(tiny_generator(), 0);
    g->to(torch::kFloat64);
    const auto out = generator_forward(*g, torch::rand({2, 1, 16, 16}, torch::kFloat64));
    CHECK(out.sizes() == torch::IntArrayRef({2, 1, 16, 16}));
    CHECK(out.isfinite().all().item<bool>());

    auto test_scale = build_generator(GeneratorConfig::test_scale(), 1);
    for (int h : {8, 16, 24, 64})
        CHECK(test_scale->forward(torch::rand({1, 1, h, 16})).sizes() == torch::IntArrayRef({1, 1, h, 16}));
}

TEST_CASE("generator rejects indivisible inputs") {
    auto g = build_generator(GeneratorConfig::test_scale(), 0);
    CHECK_THROWS_WITH_AS(g->forward(torch::rand({1, 1, 20, 20})), doctest::Contains("spatial dims not divisible"),
                         std::invalid_argument);
    CHECK_THROWS_AS(g->forward(torch::rand({1, 2, 16, 16})), std::invalid_argument);
}

TEST_CASE("initialization is reproducible from the seed") {
    auto a = build_generator(GeneratorConfig::test_scale(), 42);
    auto b = build_generator(GeneratorConfig::test_scale(), 42);
    auto c = build_generator(GeneratorConfig::test_scale(), 43);
    CHECK(same_parameters(*a, *b));
    CHECK_FALSE(same_parameters(*a, *c));
    for (auto kind : {DiscriminatorKind::product, DiscriminatorKind::early_fusion, DiscriminatorKind::late_fusion}) {
        auto d1 = build_discriminator(kind, DiscriminatorConfig::test_scale(), 5);
        auto d2 = build_discriminator(kind, DiscriminatorConfig::test_scale(), 5);
        CHECK(same_parameters(*d1, *d2));
    }
}

TEST_CASE("forward passes are deterministic") {
    auto g = build_generator(GeneratorConfig::test_scale(), 3);
    const auto x = torch::rand({3, 1, 32, 32});
    CHECK(torch::equal(g->forward(x), g->forward(x)));
}

TEST_CASE("zero output layer gives zero logits and sigmoid stays in (0,1)") {
    auto g = build_generator(tiny_generator(), 0);
    g->zero_output_layer();
    {
        torch::NoGradGuard guard;
        for (auto& p : g->named_parameters())
            if (p.key() == "head.bias") p.value().zero_();
    }
    const auto out = g->forward(torch::zeros({1, 1, 16, 16}));
    CHECK(torch::equal(out, torch::zeros_like(out)));

    auto fresh = build_generator(GeneratorConfig::test_scale(), 9);
    const auto p = torch::sigmoid(fresh->forward(torch::rand({4, 1, 32, 32})));
    CHECK((p > 0).all().item<bool>());
    CHECK((p < 1).all().item<bool>());
}

TEST_CASE("generator_forward rejects non-finite parameters") {
    auto g = build_generator(tiny_generator(), 0);
    {
        torch::NoGradGuard guard;
        g->parameters()[0].view(-1)[0] = NAN;
    }
    CHECK_THROWS(generator_forward(*g, torch::rand({1, 1, 16, 16})));
}

TEST_CASE("critics score one finite scalar per item") {
    const auto cfg = DiscriminatorConfig::test_scale();
    auto product = build_discriminator(DiscriminatorKind::product, cfg, 0);
    auto early = build_discriminator(DiscriminatorKind::early_fusion, cfg, 0);
    auto late = build_discriminator(DiscriminatorKind::late_fusion, cfg, 0);
    const auto one = torch::rand({3, 1, 16, 16}), two = torch::rand({3, 2, 16, 16});
    for (auto s : {product->forward({one, {}}), early->forward({two, {}}), late->forward({one, one * 0.5})}) {
        CHECK(s.sizes() == torch::IntArrayRef({3}));
        CHECK(s.isfinite().all().item<bool>());
    }
    CHECK(product->forward({torch::rand({1, 1, 64, 64}), {}}).sizes() == torch::IntArrayRef({1}));
    CHECK_THROWS(product->forward({two, {}}));
    CHECK_THROWS(early->forward({one, {}}));
    CHECK_THROWS(late->forward({one, {}}));
    CHECK_THROWS(late->forward({one, torch::rand({3, 1, 8, 8})}));
    CHECK(product->kind() == DiscriminatorKind::product);
    CHECK(late->kind() == DiscriminatorKind::late_fusion);
}

TEST_CASE("late fusion is not symmetric in its branches") {
    auto critic = build_discriminator(DiscriminatorKind::late_fusion, DiscriminatorConfig::test_scale(), 7);
    auto& late = dynamic_cast<LateFusionCriticImpl&>(*critic);
    {
        // Give both branches identical weights.
        torch::NoGradGuard guard;
        auto src = late.image_branch()->parameters(), dst = late.mask_branch()->parameters();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i].copy_(src[i]);
    }
    const auto image = torch::rand({2, 1, 16, 16}), mask = torch::rand({2, 1, 16, 16});
    const auto forward = critic->forward({image, mask}), swapped = critic->forward({mask, image});
    CHECK_FALSE(torch::allclose(forward, swapped));
}

TEST_CASE("squeeze-excitation gate") {
    SEBlock block(8, 2);
    block->zero_init();
    const auto x = torch::randn({2, 8, 5, 5}, torch::kFloat64);
    block->to(torch::kFloat64);
    CHECK(torch::equal(se_block(block, x), 0.5 * x));
    CHECK(torch::equal(se_block(block, torch::zeros_like(x)), torch::zeros_like(x)));

    SEBlock random(8, 2);
    random->to(torch::kFloat64);
    const auto y = torch::rand({2, 8, 5, 5}, torch::kFloat64) + 0.1;
    const auto ratio = se_block(random, y) / y;
    // One gate per (item, channel), each in (0,1).
    const auto per_channel = ratio.flatten(2);
    CHECK(torch::allclose(per_channel, per_channel.select(2, 0).unsqueeze(2).expand_as(per_channel), 0, 1e-14));
    CHECK((ratio > 0).all().item<bool>());
    CHECK((ratio < 1).all().item<bool>());
    CHECK(torch::allclose(random->gates(y), per_channel.select(2, 0), 0, 1e-14));

    CHECK_THROWS_WITH_AS(SEBlock(6, 4), doctest::Contains("not divisible"), std::invalid_argument);
}

TEST_CASE("baselines") {
    auto unet = build_baseline("unet_supervised", GeneratorConfig::test_scale(), 0);
    auto gen = build_generator(GeneratorConfig::test_scale(), 0);
    CHECK(same_parameters(*unet, *gen));
    CHECK(unet->architecture() == "unet");

    auto se = build_baseline("se_resunet", tiny_generator(), 0);
    CHECK(se->architecture() == "se-resunet");
    CHECK(se->forward(torch::rand({1, 1, 16, 16})).sizes() == torch::IntArrayRef({1, 1, 16, 16}));
    CHECK(parameter_count(*se) != parameter_count(*build_generator(tiny_generator(), 0)));

    CHECK_THROWS_WITH(build_baseline("deeplabv3", tiny_generator(), 0), doctest::Contains("out of scope"));
    CHECK_THROWS_AS(build_baseline("resnet", tiny_generator(), 0), std::invalid_argument);
}

TEST_CASE("model names") {
    CHECK(parse_model("unet").name == "unet");
    CHECK(parse_model("unet_supervised").name == "unet");
    CHECK(parse_model("se_resunet").family == ModelFamily::se_resunet);
    CHECK(*parse_model("gan-prod").discriminator == DiscriminatorKind::product);
    CHECK(*parse_model("gan-early").discriminator == DiscriminatorKind::early_fusion);
    CHECK(*parse_model("gan-late").discriminator == DiscriminatorKind::late_fusion);
    CHECK_FALSE(parse_model("unet").adversarial());
    CHECK_THROWS_WITH(parse_model("deeplabv3"), doctest::Contains("out of scope"));
    CHECK_THROWS(parse_model("gan"));
    for (auto kind : {DiscriminatorKind::product, DiscriminatorKind::early_fusion, DiscriminatorKind::late_fusion})
        CHECK(parse_kind(kind_name(kind)) == kind);
}

TEST_CASE("config validation") {
    auto c = GeneratorConfig::test_scale();
    CHECK_NOTHROW(c.validate());
    c.depth = 1;
    CHECK_THROWS(c.validate());
    c = GeneratorConfig::test_scale();
    c.base_channels = 3;
    CHECK_THROWS(c.validate());
    c = GeneratorConfig::test_scale();
    c.leaky_slope = 1.0;
    CHECK_THROWS(c.validate());
    c.leaky_slope = 0.0;
    CHECK_THROWS(c.validate());
    CHECK(GeneratorConfig::test_scale().spatial_multiple() == 8);
    CHECK(GeneratorConfig::full_scale().depth == 5);
    CHECK(GeneratorConfig::full_scale().base_channels == 64);
    DiscriminatorConfig d;
    CHECK(d.channels == std::vector<int>{32, 64, 128, 256});
    d.channels = {8, 8, 8};
    CHECK_THROWS(d.validate());
}

TEST_CASE("checkpoint round trip reproduces forward outputs bitwise") {
    TempDir tmp;
    for (auto dtype : {torch::kFloat32, torch::kFloat64}) {
        for (const char* arch : {"unet", "se-resunet"}) {
            auto model = std::string(arch) == "unet" ? build_generator(tiny_generator(), 4)
                                                     : build_baseline(arch, tiny_generator(), 4);
            model->to(dtype);
            CheckpointMeta meta;
            meta.architecture = arch;
            meta.organ = "heart";
            meta.generator = tiny_generator();
            meta.seed = 4;
            meta.epoch = 7;
            meta.val_loss = 0.25;
            meta.val_dsc = 0.8125;
            meta.dtype = std::string(dtype_name(dtype));
            meta.window = {-900, 1100};
            meta.split = oarseg::DatasetSplit{{"a", "b"}, {"c"}, {"d"}};
            const auto dir = tmp.path / (std::string(arch) + meta.dtype);
            save_checkpoint(dir, *model, meta);
            CHECK(std::filesystem::exists(dir / "manifest.json"));

            const auto loaded = load_segmenter(dir);
            CHECK(loaded.meta.architecture == arch);
            CHECK(loaded.meta.epoch == 7);
            CHECK(loaded.meta.val_dsc == 0.8125);
            CHECK(loaded.meta.window.lo == -900);
            CHECK(loaded.meta.split->test_ids == std::vector<std::string>{"d"});
            CHECK(same_parameters(*loaded.model, *model));
            const auto probe = torch::rand({2, 1, 16, 16}, dtype);
            model->eval();
            CHECK(torch::equal(loaded.model->forward(probe), model->forward(probe)));
        }
    }
    auto other = build_generator(GeneratorConfig::test_scale(), 0);
    CHECK_THROWS(load_parameters(tmp.path / "unetfloat32", *other));
    CHECK_THROWS(load_segmenter(tmp.path / "missing"));
}
