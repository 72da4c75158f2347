#include "archsearch/routing.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "archsearch/error.hpp"

namespace archsearch::routing {

namespace {

constexpr int kParams = 5;  // alpha, clip, heur, cad, int
using Vec = Eigen::Matrix<double, kParams, 1>;
using Mat = Eigen::Matrix<double, kParams, kParams>;

void check_unit(double v, const char* name) {
    require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorCode::InvalidInput,
            std::string(name) + " must be a finite value in [0,1]");
}

Vec design_row(const RoutingFeatures& f) {
    const double c = f.cad_prior ? 1.0 : 0.0;
    Vec x;
    x << 1.0, f.p_draw, f.h, c, f.p_draw * f.h;
    return x;
}

Vec to_vec(const RouterModel& m) {
    Vec w;
    w << m.alpha, m.beta_clip, m.beta_heur, m.beta_cad, m.beta_int;
    return w;
}

RouterModel from_vec(const Vec& w, double threshold) {
    return RouterModel{w(0), w(1), w(2), w(3), w(4), threshold};
}

// log(1 + e^z) without overflow.
double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double objective(std::span<const LabeledExample> data, const Vec& w, double l2) {
    double nll = 0.0;
    for (const auto& ex : data) {
        const double z = design_row(ex.features).dot(w);
        const double y = ex.label == Kind::Drawing ? 1.0 : 0.0;
        nll += softplus(z) - y * z;
    }
    nll /= static_cast<double>(data.size());
    return nll + 0.5 * l2 * w.tail<kParams - 1>().squaredNorm();
}

}  // namespace

RouterModel RouterModel::published() {
    RouterModel m;
    m.beta_clip = 5.91;
    m.beta_heur = -0.81;
    m.beta_int = 2.21;
    return m;
}

void RouterModel::validate() const {
    for (double v : {alpha, beta_clip, beta_heur, beta_cad, beta_int}) {
        require(std::isfinite(v), ErrorCode::InvalidInput, "router coefficients must be finite");
    }
    require(threshold > 0.0 && threshold < 1.0, ErrorCode::InvalidInput,
            "router threshold must lie in (0,1)");
}

void to_json(nlohmann::json& j, const RouterModel& m) {
    j = nlohmann::json{{"alpha", m.alpha},         {"beta_clip", m.beta_clip},
                       {"beta_heur", m.beta_heur}, {"beta_cad", m.beta_cad},
                       {"beta_int", m.beta_int},   {"threshold", m.threshold}};
}

void from_json(const nlohmann::json& j, RouterModel& m) {
    m.alpha = j.at("alpha").get<double>();
    m.beta_clip = j.at("beta_clip").get<double>();
    m.beta_heur = j.at("beta_heur").get<double>();
    m.beta_cad = j.at("beta_cad").get<double>();
    m.beta_int = j.at("beta_int").get<double>();
    m.threshold = j.value("threshold", 0.5);
    m.validate();
}

double combine_heuristics(double border, double edge_density, double line_score) {
    check_unit(border, "b");
    check_unit(edge_density, "edge");
    check_unit(line_score, "lines");
    return (border + edge_density + line_score) / 3.0;
}

void validate(const RoutingFeatures& f) {
    check_unit(f.p_draw, "p_draw");
    check_unit(f.h, "h");
    if (f.cues) {
        check_unit(f.cues->border, "b");
        check_unit(f.cues->edge_density, "edge");
        check_unit(f.cues->line_score, "lines");
    }
}

RoutingDecision score_logit(const RoutingFeatures& features, const RouterModel& model) {
    validate(features);
    model.validate();
    const double c = features.cad_prior ? 1.0 : 0.0;
    const double logit = model.alpha + model.beta_clip * features.p_draw +
                         model.beta_heur * features.h + model.beta_cad * c +
                         model.beta_int * (features.p_draw * features.h);
    RoutingDecision d;
    d.logit = logit;
    d.probability = sigmoid(logit);
    d.label = d.probability >= model.threshold ? Kind::Drawing : Kind::Document;
    return d;
}

double fit_objective(std::span<const LabeledExample> data, const RouterModel& model, double l2) {
    require(!data.empty(), ErrorCode::InvalidInput, "objective over empty data");
    return objective(data, to_vec(model), l2);
}

FitResult fit_router(std::span<const LabeledExample> data, const FitConfig& config) {
    require(!data.empty(), ErrorCode::DegenerateTraining, "no training examples");
    require(config.l2 >= 0.0 && config.grad_tol > 0.0 && config.max_iterations > 0,
            ErrorCode::InvalidInput, "invalid fit configuration");
    std::size_t positives = 0;
    for (const auto& ex : data) {
        validate(ex.features);
        positives += ex.label == Kind::Drawing ? 1 : 0;
    }
    require(positives > 0 && positives < data.size(), ErrorCode::DegenerateTraining,
            "router training needs examples of both labels");

    const double n = static_cast<double>(data.size());
    Vec reg = Vec::Constant(config.l2);
    reg(0) = 0.0;

    Vec w = Vec::Zero();
    double f = objective(data, w, config.l2);
    FitResult result;

    for (int it = 0; it < config.max_iterations; ++it) {
        Vec grad = Vec::Zero();
        Mat hess = Mat::Zero();
        for (const auto& ex : data) {
            const Vec x = design_row(ex.features);
            const double p = sigmoid(x.dot(w));
            const double y = ex.label == Kind::Drawing ? 1.0 : 0.0;
            grad += (p - y) * x;
            hess += (p * (1.0 - p)) * (x * x.transpose());
        }
        grad /= n;
        hess /= n;
        grad += reg.cwiseProduct(w);
        hess += reg.asDiagonal();

        result.iterations = it;
        result.gradient_norm = grad.norm();
        if (result.gradient_norm < config.grad_tol) {
            break;
        }

        Vec step = hess.ldlt().solve(-grad);
        double slope = grad.dot(step);
        if (!step.allFinite() || slope >= 0.0) {
            step = -grad;
            slope = -grad.squaredNorm();
        }

        // Armijo backtracking.
        double t = 1.0;
        double f_next = objective(data, w + t * step, config.l2);
        int halvings = 0;
        while (!(f_next <= f + 1e-4 * t * slope) && halvings < 60) {
            t *= 0.5;
            f_next = objective(data, w + t * step, config.l2);
            ++halvings;
        }
        if (halvings == 60) {
            break;  // no further decrease representable in double precision
        }
        w += t * step;
        f = f_next;
        result.iterations = it + 1;
    }

    result.model = from_vec(w, config.threshold);
    result.objective = f;
    return result;
}

double f1_score(double precision, double recall) {
    const double denom = precision + recall;
    return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

ClassificationReport evaluate_router(std::span<const Kind> predictions, std::span<const Kind> truth) {
    require(!truth.empty(), ErrorCode::InvalidInput, "evaluate_router: empty input");
    require(predictions.size() == truth.size(), ErrorCode::InvalidInput,
            "evaluate_router: predictions and truth differ in length");

    ClassificationReport r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        r.confusion[static_cast<int>(truth[i])][static_cast<int>(predictions[i])] += 1;
    }
    auto per_class = [&](int k) {
        const int other = 1 - k;
        const auto tp = static_cast<double>(r.confusion[k][k]);
        const auto fp = static_cast<double>(r.confusion[other][k]);
        const auto fn = static_cast<double>(r.confusion[k][other]);
        ClassMetrics m;
        m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
        m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
        m.f1 = f1_score(m.precision, m.recall);
        m.support = r.confusion[k][k] + r.confusion[k][other];
        return m;
    };
    r.drawing = per_class(0);
    r.document = per_class(1);
    r.accuracy = static_cast<double>(r.confusion[0][0] + r.confusion[1][1]) /
                 static_cast<double>(truth.size());
    r.macro_precision = 0.5 * (r.drawing.precision + r.document.precision);
    r.macro_recall = 0.5 * (r.drawing.recall + r.document.recall);
    r.macro_f1 = 0.5 * (r.drawing.f1 + r.document.f1);
    return r;
}

void to_json(nlohmann::json& j, const ClassificationReport& r) {
    auto cls = [](const ClassMetrics& m) {
        return nlohmann::json{{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                              {"support", m.support}};
    };
    j = nlohmann::json{
        {"drawing", cls(r.drawing)},
        {"document", cls(r.document)},
        {"accuracy", r.accuracy},
        {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}}},
        {"confusion", {{r.confusion[0][0], r.confusion[0][1]}, {r.confusion[1][0], r.confusion[1][1]}}},
    };
}

}  // namespace archsearch::routing
