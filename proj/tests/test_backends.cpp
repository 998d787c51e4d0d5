#include <doctest.h>

#include <set>

#include "opsam/metrics.hpp"
#include "opsam/oracle_segmenter.hpp"
#include "opsam/synthetic.hpp"
#include "testing.hpp"

using namespace opsam;

namespace {

MaskGrid rect(int h, int w, int y0, int x0, int y1, int x1) {
    MaskGrid m(h, w);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) m(y, x) = 1;
    return m;
}

// Flat two-colour image: lesion colour on `m`, tissue colour elsewhere,
// with a per-pixel wobble that keeps each pixel's nearest reference colour.
ImageRGB paint(const MaskGrid& m, gen::Rng& rng) {
    ImageRGB img(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            const std::uint8_t* c = m(y, x) ? kLesionRGB : kTissueRGB;
            for (int k = 0; k < 3; ++k) img.pixel(y, x)[k] = static_cast<std::uint8_t>(c[k] + gen::uniform_int(rng, -5, 5));
        }
    return img;
}

const std::array<EmbeddingKind, 4> kAll{EmbeddingKind::query, EmbeddingKind::key, EmbeddingKind::value,
                                        EmbeddingKind::feats};

} // namespace

TEST_CASE("make_scene") {
    const SyntheticScene a = make_scene(42), b = make_scene(42);
    CHECK(a.image == b.image);
    CHECK(a.gt_mask == b.gt_mask);
    CHECK_FALSE(a.gt_mask.empty());
    CHECK(make_scene(43).image != a.image);

    SceneOptions two;
    two.blobs = 2;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const SyntheticScene sc = make_scene(s, two);
        REQUIRE(sc.blobs.size() == 2);
        CHECK(label_components(sc.gt_mask).count == 2);
        CHECK(intersection_count(sc.blobs[0], sc.blobs[1]) == 0);
        CHECK(mask_or(sc.blobs[0], sc.blobs[1]) == sc.gt_mask);
    }
    SceneOptions none;
    none.blobs = 0;
    CHECK(make_scene(1, none).gt_mask.empty());
}

TEST_CASE("synthetic encoder is deterministic and unit-norm") {
    const SyntheticEncoder enc;
    const SyntheticScene s = make_scene(3);
    const EncodedImage a = enc.encode(s.image, kAll), b = enc.encode(s.image, kAll);
    CHECK(a.layout == PatchLayout{32, 32, 4.0, 4.0});
    for (EmbeddingKind k : kAll) {
        const FeatureMap& f = a.embeddings.get(k);
        CHECK(f.rows == b.embeddings.get(k).rows);
        CHECK(f.dim == 32);
        for (std::size_t i = 0; i < f.patches(); ++i) CHECK(std::abs(dot(f.rows.row(i), f.rows.row(i)) - 1.0) <= 1e-6);
    }
    CHECK(a.embeddings.get(EmbeddingKind::query).rows != a.embeddings.get(EmbeddingKind::key).rows);
    CHECK(SyntheticEncoder({4, 32, 0.1, 8}).encode(s.image, kAll).embeddings.get(EmbeddingKind::value).rows !=
          a.embeddings.get(EmbeddingKind::value).rows);

    const std::array<EmbeddingKind, 1> only{EmbeddingKind::key};
    const EncodedImage k = enc.encode(s.image, only);
    CHECK(k.embeddings.has(EmbeddingKind::key));
    CHECK_FALSE(k.embeddings.has(EmbeddingKind::value));
}

TEST_CASE("noise-free encoder gives block-constant cross-correlation") {
    gen::Rng rng(4);
    const SyntheticEncoder enc({4, 16, 0.0, 7});
    const MaskGrid layout = rect(32, 32, 8, 8, 23, 15);
    const std::array<EmbeddingKind, 1> v{EmbeddingKind::value};
    const FeatureMap a = enc.encode(paint(layout, rng), v).embeddings.get(EmbeddingKind::value);
    const FeatureMap b = enc.encode(paint(layout, rng), v).embeddings.get(EmbeddingKind::value);
    const Prior cls = resize_mask_to_patches(layout, 8, 8);
    std::set<double> blocks[2][2];
    for (std::size_t i = 0; i < a.patches(); ++i)
        for (std::size_t j = 0; j < b.patches(); ++j)
            blocks[cls.data[i] > 0.5][cls.data[j] > 0.5].insert(dot(a.rows.row(i), b.rows.row(j)));
    for (auto& row : blocks)
        for (auto& blk : row) CHECK(blk.size() == 1);
    CHECK(*blocks[1][1].begin() > *blocks[0][1].begin());
}

TEST_CASE("lesion fraction follows the pixel colours") {
    gen::Rng rng(5);
    const SyntheticEncoder enc;
    const MaskGrid m = rect(8, 8, 0, 0, 3, 1);
    const Prior f = enc.lesion_fraction(paint(m, rng));
    CHECK(f.data == std::vector<double>{0.5, 0, 0, 0});
}

TEST_CASE("oracle_segment examples") {
    const MaskGrid a = rect(20, 20, 2, 2, 6, 6), b = rect(20, 20, 12, 12, 17, 17);
    const MaskGrid gt = mask_or(a, b);
    const SegmenterResult one = oracle_segment(a, {{4, 4, PromptLabel::positive}});
    CHECK(one.mask == a);
    CHECK(one.predicted_iou == 1.0);

    const SegmenterResult only_a = oracle_segment(gt, {{3, 3, PromptLabel::positive}});
    CHECK(only_a.mask == a);
    CHECK(std::abs(only_a.predicted_iou - double(a.count()) / double(gt.count())) <= 1e-12);

    const SegmenterResult both = oracle_segment(gt, {{3, 3, PromptLabel::positive}, {15, 15, PromptLabel::positive}});
    CHECK(both.mask == gt);

    const SegmenterResult dropped = oracle_segment(gt, {{3, 3, PromptLabel::positive}, {15, 15, PromptLabel::positive},
                                                        {13, 13, PromptLabel::negative}});
    CHECK(dropped.mask == a);

    const SegmenterResult fp = oracle_segment(gt, {{10, 0, PromptLabel::positive}});
    CHECK(fp.mask.count() == 18); // lower half of a radius-3 disk, clipped at row 0
    CHECK(fp.mask(0, 10) == 1);
    CHECK(fp.predicted_iou == 0.0);

    const SegmenterResult disk = oracle_segment(gt, {{10, 9, PromptLabel::positive}});
    CHECK(disk.mask.count() == 29);
    const SegmenterResult suppressed =
        oracle_segment(gt, {{10, 9, PromptLabel::positive}, {11, 10, PromptLabel::negative}});
    CHECK(suppressed.mask.empty());

    const SegmenterResult neg_only = oracle_segment(gt, {{3, 3, PromptLabel::negative}});
    CHECK(neg_only.mask.empty());
    CHECK(neg_only.predicted_iou == 0.0);
    CHECK(oracle_segment(gt, {}).mask.empty());

    CHECK_THROWS_AS(oracle_segment(gt, {{20, 0, PromptLabel::positive}}), ContractViolation);
}

TEST_CASE("oracle predicted_iou equals the true IoU") {
    gen::Rng rng(6);
    for (int t = 0; t < 100; ++t) {
        const int h = gen::uniform_int(rng, 5, 30), w = gen::uniform_int(rng, 5, 30);
        const MaskGrid gt = gen::random_mask(rng, h, w, 0.5);
        PromptList prompts;
        for (int k = gen::uniform_int(rng, 1, 5); k > 0; --k)
            prompts.push_back({gen::uniform_int(rng, 0, w - 1), gen::uniform_int(rng, 0, h - 1),
                               gen::uniform_int(rng, 0, 2) ? PromptLabel::positive : PromptLabel::negative});
        const SegmenterResult r = oracle_segment(gt, prompts);
        const bool any_pos = std::any_of(prompts.begin(), prompts.end(), [](const PromptPoint& p) { return p.label == PromptLabel::positive; });
        if (!any_pos) {
            CHECK(r.predicted_iou == 0.0);
            continue;
        }
        CHECK(std::abs(r.predicted_iou - ref::iou(r.mask, gt)) <= 1e-12);
        CHECK(oracle_segment(gt, prompts).mask == r.mask);
    }
}

TEST_CASE("oracle segmenter sessions") {
    const MaskGrid gt = rect(10, 10, 2, 2, 5, 5);
    const OracleSegmenter fixed(gt);
    auto s = fixed.open_session(ImageRGB(10, 10), "q");
    CHECK(s->predict({{3, 3, PromptLabel::positive}}).mask == gt);
    CHECK_THROWS_AS(fixed.open_session(ImageRGB(10, 11), "q"), ShapeError);

    const OracleSegmenter lookup([&](std::string_view id) -> std::optional<MaskGrid> {
        if (id == "known") return gt;
        return std::nullopt;
    });
    CHECK_NOTHROW(lookup.open_session(ImageRGB(10, 10), "known"));
    CHECK_THROWS_AS(lookup.open_session(ImageRGB(10, 10), "other"), BackendError);
}
