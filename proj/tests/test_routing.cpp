#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "archsearch/error.hpp"
#include "archsearch/routing.hpp"

using namespace archsearch;
using namespace archsearch::routing;

namespace {

RouterModel paper_slopes() {
    RouterModel m;
    m.beta_clip = 5.91;
    m.beta_heur = -0.81;
    m.beta_int = 2.21;
    return m;
}

RoutingFeatures feat(double p, double h, bool c = false) {
    RoutingFeatures f;
    f.p_draw = p;
    f.h = h;
    f.cad_prior = c;
    return f;
}

}  // namespace

TEST(ScoreLogit, ZeroFeaturesTieRoutesToDrawing) {
    RouterModel m = paper_slopes();
    const auto d = score_logit(feat(0, 0), m);
    EXPECT_EQ(d.logit, 0.0);
    EXPECT_EQ(d.probability, 0.5);
    EXPECT_EQ(d.label, Kind::Drawing);
}

TEST(ScoreLogit, PublishedSlopesAtFullCues) {
    const auto d = score_logit(feat(1, 1), paper_slopes());
    EXPECT_NEAR(d.logit, 7.31, 1e-12);
    // 1/(1+e^-7.31), 24-digit evaluation
    EXPECT_NEAR(d.probability, 0.999331629965204582885678, 1e-15);
    EXPECT_EQ(d.label, Kind::Drawing);
}

TEST(ScoreLogit, HalfClip) {
    const auto d = score_logit(feat(0.5, 0), paper_slopes());
    EXPECT_NEAR(d.logit, 2.955, 1e-12);
    EXPECT_EQ(d.label, Kind::Drawing);
}

TEST(ScoreLogit, NegativeLogitIsDocument) {
    RouterModel m = paper_slopes();
    m.alpha = -4.0;
    EXPECT_EQ(score_logit(feat(0.1, 0.1), m).label, Kind::Document);
}

TEST(ScoreLogit, IncreasingInClipForPublishedSlopes) {
    const auto m = paper_slopes();
    for (double h = 0; h <= 1.0; h += 0.25) {
        double prev = -1e300;
        for (double p = 0; p <= 1.0; p += 0.05) {
            const double l = score_logit(feat(p, h), m).logit;
            EXPECT_GT(l, prev);
            prev = l;
        }
    }
}

TEST(ScoreLogit, RejectsNonFinite) {
    auto m = paper_slopes();
    m.alpha = std::nan("");
    EXPECT_THROW(score_logit(feat(0.2, 0.2), m), Error);
    EXPECT_THROW(score_logit(feat(std::nan(""), 0.2), paper_slopes()), Error);
}

TEST(CombineHeuristics, ArithmeticMean) {
    EXPECT_EQ(combine_heuristics(0, 0, 0), 0.0);
    EXPECT_EQ(combine_heuristics(1, 1, 1), 1.0);
    EXPECT_NEAR(combine_heuristics(0.3, 0.6, 0.9), 0.6, 1e-15);
}

TEST(CombineHeuristics, RejectsOutOfRange) {
    try {
        combine_heuristics(0.2, 1.5, 0.1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidInput);
    }
    EXPECT_THROW(combine_heuristics(-0.1, 0, 0), Error);
}

TEST(FitRouter, SeparableOneDimensional) {
    std::vector<LabeledExample> data;
    for (int i = 0; i <= 20; ++i) {
        const double p = i / 20.0;
        if (p == 0.5) continue;
        data.push_back({feat(p, 0), p > 0.5 ? Kind::Drawing : Kind::Document});
    }
    const auto fit = fit_router(data);
    for (const auto& e : data) EXPECT_EQ(score_logit(e.features, fit.model).label, e.label);
}

TEST(FitRouter, ClipDominatesNoiseAndBeatsGridSearch) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<LabeledExample> data;
    for (int i = 0; i < 20; ++i) {
        const double p = (i + 0.5) / 20.0;
        data.push_back({feat(p, u(rng)), p > 0.5 ? Kind::Drawing : Kind::Document});
    }
    // Strong l2 keeps the optimum finite so the grid can bracket it.
    FitConfig cfg;
    cfg.l2 = 0.05;
    const auto fit = fit_router(data, cfg);
    EXPECT_GT(std::fabs(fit.model.beta_clip), 5 * std::fabs(fit.model.beta_heur));

    double grid_best = 1e300;
    for (double a = -8; a <= 8; a += 0.5)
        for (double bc = -2; bc <= 16; bc += 0.5)
            for (double bh = -4; bh <= 4; bh += 0.5) {
                RouterModel m;
                m.alpha = a;
                m.beta_clip = bc;
                m.beta_heur = bh;
                grid_best = std::min(grid_best, fit_objective(data, m, cfg.l2));
            }
    EXPECT_LE(fit.objective, grid_best + 1e-12);
}

TEST(FitRouter, DuplicatedRowsAndReorderingGiveSameModel) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<LabeledExample> data;
    for (int i = 0; i < 60; ++i) {
        auto f = feat(u(rng), u(rng), u(rng) < 0.3);
        const bool drawing = 3 * f.p_draw + f.h + 0.3 * u(rng) > 2.0;
        data.push_back({f, drawing ? Kind::Drawing : Kind::Document});
    }
    const auto base = fit_router(data).model;

    auto doubled = data;
    doubled.insert(doubled.end(), data.begin(), data.end());
    const auto dup = fit_router(doubled).model;

    auto shuffled = data;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto shuf = fit_router(shuffled).model;

    for (const auto* m : {&dup, &shuf}) {
        EXPECT_NEAR(m->alpha, base.alpha, 1e-6);
        EXPECT_NEAR(m->beta_clip, base.beta_clip, 1e-6);
        EXPECT_NEAR(m->beta_heur, base.beta_heur, 1e-6);
        EXPECT_NEAR(m->beta_cad, base.beta_cad, 1e-6);
        EXPECT_NEAR(m->beta_int, base.beta_int, 1e-6);
    }
}

TEST(FitRouter, SingleClassIsDegenerate) {
    std::vector<LabeledExample> data = {{feat(0.9, 0.5), Kind::Drawing}, {feat(0.7, 0.1), Kind::Drawing}};
    try {
        fit_router(data);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateTraining);
    }
}

TEST(EvaluateRouter, Perfect) {
    std::vector<Kind> t = {Kind::Drawing, Kind::Document, Kind::Drawing};
    const auto r = evaluate_router(t, t);
    EXPECT_EQ(r.accuracy, 1.0);
    EXPECT_EQ(r.drawing.f1, 1.0);
    EXPECT_EQ(r.document.precision, 1.0);
    EXPECT_EQ(r.macro_f1, 1.0);
}

TEST(EvaluateRouter, NineOneOneNine) {
    std::vector<Kind> truth;
    std::vector<Kind> pred;
    auto add = [&](Kind t, Kind p, int n) {
        for (int i = 0; i < n; ++i) {
            truth.push_back(t);
            pred.push_back(p);
        }
    };
    add(Kind::Drawing, Kind::Drawing, 9);
    add(Kind::Document, Kind::Drawing, 1);
    add(Kind::Drawing, Kind::Document, 1);
    add(Kind::Document, Kind::Document, 9);
    const auto r = evaluate_router(pred, truth);
    EXPECT_NEAR(r.drawing.precision, 0.9, 1e-15);
    EXPECT_NEAR(r.drawing.recall, 0.9, 1e-15);
    EXPECT_NEAR(r.drawing.f1, 0.9, 1e-15);
    EXPECT_NEAR(r.accuracy, 0.9, 1e-15);
    EXPECT_EQ(r.confusion[0][0], 9);
    EXPECT_EQ(r.confusion[0][1], 1);
    EXPECT_EQ(r.confusion[1][0], 1);
}

TEST(EvaluateRouter, MacroF1InvariantUnderRelabeling) {
    std::vector<Kind> truth = {Kind::Drawing, Kind::Drawing, Kind::Document, Kind::Document, Kind::Drawing};
    std::vector<Kind> pred = {Kind::Drawing, Kind::Document, Kind::Document, Kind::Drawing, Kind::Drawing};
    auto flip = [](std::vector<Kind> v) {
        for (auto& k : v) k = k == Kind::Drawing ? Kind::Document : Kind::Drawing;
        return v;
    };
    const auto a = evaluate_router(pred, truth);
    const auto b = evaluate_router(flip(pred), flip(truth));
    EXPECT_NEAR(a.macro_f1, b.macro_f1, 1e-15);
    EXPECT_NEAR(a.drawing.f1, b.document.f1, 1e-15);
}

TEST(EvaluateRouter, RejectsBadInput) {
    std::vector<Kind> a = {Kind::Drawing};
    std::vector<Kind> b;
    EXPECT_THROW(evaluate_router(a, b), Error);
    EXPECT_THROW(evaluate_router(b, b), Error);
}

TEST(F1Score, PublishedRow) {
    EXPECT_NEAR(f1_score(0.919, 0.977), 0.947, 1e-3);
    EXPECT_NEAR(f1_score(0.922, 0.945), 0.934, 1e-3);
    EXPECT_EQ(f1_score(0, 0), 0.0);
}

TEST(RouterModel, JsonRoundTrip) {
    auto m = paper_slopes();
    m.alpha = -3.25;
    m.beta_cad = 0.4;
    m.threshold = 0.4;
    nlohmann::json j;
    to_json(j, m);
    RouterModel back;
    from_json(j, back);
    EXPECT_EQ(back.alpha, m.alpha);
    EXPECT_EQ(back.beta_cad, m.beta_cad);
    EXPECT_EQ(back.beta_int, m.beta_int);
    EXPECT_EQ(back.threshold, m.threshold);
}
