#include "complearn/dcl/risk.hpp"
#include "complearn/divergence/divergence.hpp"
#include "complearn/error.hpp"
#include "complearn/harness/experiment.hpp"
#include "complearn/harness/mixture.hpp"
#include "complearn/harness/svg.hpp"
#include "complearn/labels/dataset.hpp"
#include "complearn/priors/qp.hpp"
#include "complearn/random.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace complearn;

namespace {

labels::TransitionMatrix as_transition(const Eigen::MatrixXd& m) { return labels::TransitionMatrix(m); }

py::object parse_json(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

py::dict cell_dict(const harness::CellResult& c) {
  py::dict d;
  d["labeled_ratio"] = c.labeled_ratio;
  d["seed"] = c.seed;
  d["method"] = harness::to_string(c.method);
  d["ok"] = c.ok;
  d["accuracy"] = c.accuracy;
  d["m_error"] = c.m_error;
  d["message"] = c.message;
  d["warnings"] = c.warnings;
  return d;
}

}  // namespace

PYBIND11_MODULE(_complearn, m) {
  m.doc() = "Complementary-label learning: transitions, priors, divergences and experiment grids";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);

  m.def("derive_seed", [](std::uint64_t parent, const std::string& tag) { return derive_seed(parent, tag); },
        py::arg("parent"), py::arg("tag"));

  m.def("uniform_transition", [](int k) { return labels::uniform_transition(k).entries(); }, py::arg("k"));
  m.def("random_transition", [](int k, std::uint64_t seed) { return labels::random_transition(k, seed).entries(); },
        py::arg("k"), py::arg("seed"));
  m.def("forward_correct",
        [](const Eigen::MatrixXd& transition, const Eigen::MatrixXd& probs) {
          return labels::forward_correct(as_transition(transition), probs);
        },
        py::arg("transition"), py::arg("probs"));
  m.def("complementary_labels",
        [](const std::vector<int>& y, const Eigen::MatrixXd& transition, int per_example, std::uint64_t seed) {
          std::vector<std::vector<int>> out;
          for (auto& c : labels::generate_complementary(y, as_transition(transition), per_example, seed))
            out.push_back(std::move(c.labels));
          return out;
        },
        py::arg("labels"), py::arg("transition"), py::arg("per_example") = 1, py::arg("seed") = 0);
  m.def("complementary_risk",
        [](const Eigen::MatrixXd& probs, const std::vector<std::vector<int>>& comp, const Eigen::MatrixXd& transition) {
          std::vector<labels::LabelEvidence> ev;
          for (const auto& c : comp) ev.emplace_back(labels::Complementary{c});
          return dcl::multi_complementary_risk(probs, ev, as_transition(transition));
        },
        py::arg("probs"), py::arg("complementary"), py::arg("transition"),
        "Mean corrected loss over every complementary label of every row.");

  m.def("simplex_project", [](const Eigen::VectorXd& v) { return priors::simplex_project(v).values(); },
        py::arg("v"));
  m.def("estimate_prior_qp",
        [](const Eigen::VectorXd& comp_prior, const Eigen::MatrixXd& transition) {
          const auto sol = priors::estimate_prior_qp(SimplexVector(comp_prior), as_transition(transition));
          py::dict d;
          d["estimate"] = sol.estimate.values();
          d["residual"] = sol.residual;
          d["iterations"] = sol.iterations;
          d["converged"] = sol.converged;
          d["rank_deficient"] = sol.rank_deficient;
          return d;
        },
        py::arg("comp_prior"), py::arg("transition"));

  m.def("tv", &divergence::tv, py::arg("p"), py::arg("q"));
  m.def("kl", &divergence::kl, py::arg("p"), py::arg("q"));
  m.def("js", &divergence::js, py::arg("p"), py::arg("q"));
  m.def("inf_norm_inverse", &divergence::inf_norm_inverse, py::arg("m"));
  m.def("verify_bound",
        [](const Eigen::MatrixXd& p_xy, const Eigen::MatrixXd& q_xy, const Eigen::MatrixXd& q_prime,
           const Eigen::MatrixXd& transition) {
          return parse_json(divergence::verify_theorem1_chain(divergence::DiscreteJoint(p_xy),
                                                              divergence::DiscreteJoint(q_xy), q_prime,
                                                              as_transition(transition))
                                .to_json());
        },
        py::arg("p_xy"), py::arg("q_xy"), py::arg("q_prime"), py::arg("transition"));
  m.def("verify_random_bound",
        [](int max_support, int max_classes, std::uint64_t seed) {
          const auto inst = divergence::random_bound_instance(max_support, max_classes, seed);
          return parse_json(divergence::verify_theorem1_chain(inst.p_xy, inst.q_xy, inst.q_prime, inst.m).to_json());
        },
        py::arg("max_support") = 6, py::arg("max_classes") = 4, py::arg("seed") = 0);

  m.def("ring_mixture",
        [](int classes, long n, std::uint64_t seed, double radius, double sigma, long dim) {
          auto data = harness::gen_ring_mixture(harness::GaussianMixtureSpec::ring(classes, radius, sigma, dim), n, seed);
          return py::make_tuple(std::move(data.features), std::move(data.labels));
        },
        py::arg("classes"), py::arg("n"), py::arg("seed"), py::arg("radius") = 2.0, py::arg("sigma") = 0.35,
        py::arg("dim") = 2);
  m.def("bayes_accuracy",
        [](int classes, const Eigen::MatrixXd& x, const std::vector<int>& y, double radius, double sigma) {
          const auto spec = harness::GaussianMixtureSpec::ring(classes, radius, sigma, x.cols());
          return harness::bayes_accuracy_oracle(spec, {x, y});
        },
        py::arg("classes"), py::arg("x"), py::arg("y"), py::arg("radius") = 2.0, py::arg("sigma") = 0.35);

  m.def("resolve_config",
        [](const std::string& json_text) { return parse_json(harness::ExperimentConfig::parse(json_text).dump()); },
        py::arg("json_text"), "Parse a config and return every field, defaults included.");
  m.def("run_experiment",
        [](const std::string& json_text, int workers) {
          const auto config = harness::ExperimentConfig::parse(json_text);
          harness::ExperimentResult result;
          {
            py::gil_scoped_release release;
            result = harness::run_experiment(config, workers);
          }
          py::list cells;
          for (const auto& c : result.cells) cells.append(cell_dict(c));
          return cells;
        },
        py::arg("json_text"), py::arg("workers") = 1,
        "Run a grid config (JSON text); files land in its output_dir.");
  m.def("plot_samples", &harness::emit_scatter_svg, py::arg("samples_csv"), py::arg("svg_path"),
        py::arg("classes") = 0);
}
