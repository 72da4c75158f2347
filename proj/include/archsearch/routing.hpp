#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "archsearch/types.hpp"

namespace archsearch::routing {

/// Raster-level structural cues, each already normalized to [0,1] upstream.
struct HeuristicCues {
    double border = 0.0;
    double edge_density = 0.0;
    double line_score = 0.0;
};

struct RoutingFeatures {
    double p_draw = 0.0;  // external image-classifier drawing probability
    double h = 0.0;       // heuristic score
    bool cad_prior = false;
    std::optional<HeuristicCues> cues;
};

/// Logistic router: logit = alpha + b_clip*p + b_heur*h + b_cad*c + b_int*(p*h).
struct RouterModel {
    double alpha = 0.0;
    double beta_clip = 0.0;
    double beta_heur = 0.0;
    double beta_cad = 0.0;
    double beta_int = 0.0;
    double threshold = 0.5;

    /// Published CLIP/heuristic/interaction weights; alpha and beta_cad are zero
    /// because they were never reported and must come from fit_router.
    static RouterModel published();

    void validate() const;
};

void to_json(nlohmann::json& j, const RouterModel& m);
void from_json(const nlohmann::json& j, RouterModel& m);

struct RoutingDecision {
    Kind label = Kind::Document;
    double probability = 0.0;
    double logit = 0.0;
};

/// Arithmetic mean of the three cues. Throws InvalidInput outside [0,1].
double combine_heuristics(double border, double edge_density, double line_score);

void validate(const RoutingFeatures& f);

/// Probabilities equal to the threshold route to Drawing.
RoutingDecision score_logit(const RoutingFeatures& features, const RouterModel& model);

struct LabeledExample {
    RoutingFeatures features;
    Kind label = Kind::Document;
};

struct FitConfig {
    double l2 = 1e-4;            // applied to the four slopes, not the intercept
    double grad_tol = 1e-8;
    int max_iterations = 10000;
    double threshold = 0.5;
};

struct FitResult {
    RouterModel model;
    int iterations = 0;
    double gradient_norm = 0.0;
    double objective = 0.0;
};

/// Mean negative log-likelihood plus (l2/2)*|slopes|^2. Exposed for oracles.
double fit_objective(std::span<const LabeledExample> data, const RouterModel& model, double l2);

/// Damped Newton descent on the regularized mean NLL. Deterministic; row order
/// only affects floating-point summation order.
FitResult fit_router(std::span<const LabeledExample> data, const FitConfig& config = {});

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long long support = 0;
};

/// Rows/columns indexed [truth][predicted] with 0 = Drawing, 1 = Document.
struct ClassificationReport {
    ClassMetrics drawing;
    ClassMetrics document;
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    long long confusion[2][2] = {{0, 0}, {0, 0}};
};

void to_json(nlohmann::json& j, const ClassificationReport& r);

/// Harmonic mean; 0 when both inputs are 0.
double f1_score(double precision, double recall);

ClassificationReport evaluate_router(std::span<const Kind> predictions, std::span<const Kind> truth);

}  // namespace archsearch::routing
