#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "splitsmc/cache.hpp"
#include "splitsmc/config.hpp"
#include "splitsmc/core.hpp"
#include "splitsmc/data.hpp"
#include "splitsmc/metrics.hpp"
#include "splitsmc/runner.hpp"

namespace py = pybind11;
using namespace splitsmc;

namespace {

using Points = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<long long, py::array::c_style | py::array::forcecast>;

Dataset points_dataset(const Points& x) {
  if (x.ndim() != 2) throw py::value_error("points must be a 2-D array (n, d)");
  std::vector<PointRecord> records(static_cast<std::size_t>(x.shape(0)));
  auto v = x.unchecked<2>();
  for (py::ssize_t i = 0; i < x.shape(0); ++i) {
    records[i].id = std::to_string(i);
    records[i].x.resize(static_cast<std::size_t>(x.shape(1)));
    for (py::ssize_t d = 0; d < x.shape(1); ++d) records[i].x[d] = v(i, d);
  }
  return dataset_from_points(records);
}

Partition labels_partition(const Labels& labels) {
  if (labels.ndim() != 1) throw py::value_error("labels must be 1-D");
  std::vector<std::string> s(static_cast<std::size_t>(labels.shape(0)));
  auto v = labels.unchecked<1>();
  for (py::ssize_t i = 0; i < labels.shape(0); ++i) s[i] = std::to_string(v(i));
  return partition_from_labels(s);
}

Labels partition_labels(const Partition& p) {
  Labels out(static_cast<py::ssize_t>(p.num_items()));
  auto v = out.mutable_unchecked<1>();
  for (std::size_t k = 0; k < p.num_clusters(); ++k)
    for (DataId id : p.cluster(k).members()) v(index_of(id)) = static_cast<long long>(k);
  return out;
}

ModelSpec nig_spec(double mu0, double lambda, double a, double b) {
  ModelSpec s;
  s.kind = "nig";
  s.mu0 = {mu0};
  s.lambda = lambda;
  s.a = a;
  s.b = b;
  return s;
}

py::tuple records_to_numpy(const std::vector<PointRecord>& records) {
  const std::size_t d = records.empty() ? 0 : records.front().x.size();
  Points x({static_cast<py::ssize_t>(records.size()), static_cast<py::ssize_t>(d)});
  Labels y(static_cast<py::ssize_t>(records.size()));
  auto xv = x.mutable_unchecked<2>();
  auto yv = y.mutable_unchecked<1>();
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) xv(i, j) = records[i].x[j];
    yv(i) = std::stoll(*records[i].gold);
  }
  return py::make_tuple(x, y);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Split sequential Monte Carlo clustering";

  m.attr("ALGORITHMS") = std::vector<std::string>{"greedy", "smc", "split-smc", "gibbs", "mwg", "agglom"};

  m.def("bell_number", &bell_number, py::arg("n"));

  m.def(
      "crp_assignment_log_prior",
      [](std::vector<std::size_t> sizes, double alpha, std::size_t t, std::optional<std::size_t> target) {
        return crp_assignment_log_prior(sizes, alpha, t, target ? *target : kNewCluster);
      },
      py::arg("sizes"), py::arg("alpha"), py::arg("t"), py::arg("target") = py::none(),
      "Log CRP probability of joining cluster `target` (None opens a new cluster).");

  m.def(
      "nig_log_marginal",
      [](const Points& x, double mu0, double lambda, double a, double b) {
        Dataset ds = points_dataset(x);
        NigGaussianModel model = NigGaussianModel::isotropic(ds.store->point(make_id(0)).size(), mu0, lambda, a, b);
        const auto ids = ds.stream();
        return model.log_marginal(ids, *ds.store);
      },
      py::arg("x"), py::arg("mu0") = 0.0, py::arg("lam") = 0.0002, py::arg("a") = 2.0, py::arg("b") = 0.5,
      "Log marginal likelihood of all rows of x as one cluster.");

  m.def(
      "ewens_log_posterior",
      [](const Labels& labels, const Points& x, double alpha, double mu0, double lambda, double a, double b) {
        Dataset ds = points_dataset(x);
        const Partition p = labels_partition(labels);
        if (p.num_items() != ds.size()) throw py::value_error("labels and points differ in length");
        ModelEvaluator model(build_model(nig_spec(mu0, lambda, a, b), ds.store->point(make_id(0)).size()), ds.store);
        return ewens_log_posterior(p, alpha, model);
      },
      py::arg("labels"), py::arg("x"), py::arg("alpha") = 1.0, py::arg("mu0") = 0.0, py::arg("lam") = 0.0002,
      py::arg("a") = 2.0, py::arg("b") = 0.5);

  m.def(
      "exact_posterior",
      [](const Points& x, double alpha, double mu0, double lambda, double a, double b) {
        Dataset ds = points_dataset(x);
        ModelEvaluator model(build_model(nig_spec(mu0, lambda, a, b), ds.store->point(make_id(0)).size()), ds.store);
        const auto ids = ds.stream();
        py::list out;
        for (const auto& atom : exact_posterior(ids, alpha, model)) out.append(py::make_tuple(partition_labels(atom.partition), atom.prob));
        return out;
      },
      py::arg("x"), py::arg("alpha") = 1.0, py::arg("mu0") = 0.0, py::arg("lam") = 0.0002, py::arg("a") = 2.0,
      py::arg("b") = 0.5, "All (labels, probability) pairs for at most 10 points.");

  m.def(
      "bcubed",
      [](const Labels& pred, const Labels& gold) {
        const EvalReport r = bcubed(labels_partition(pred), labels_partition(gold));
        return py::dict(py::arg("precision") = r.precision, py::arg("recall") = r.recall, py::arg("f1") = r.f1);
      },
      py::arg("pred"), py::arg("gold"));

  m.def(
      "gen_gmm",
      [](std::uint64_t seed, std::size_t n, double alpha_dp) {
        GmmGenConfig g;
        g.seed = seed;
        g.n = n;
        g.alpha_dp = alpha_dp;
        return records_to_numpy(gen_gmm(g));
      },
      py::arg("seed") = 0, py::arg("n") = 700, py::arg("alpha_dp") = 20.0, "Returns (points, gold labels).");

  m.def(
      "gen_circles",
      [](std::uint64_t seed) {
        CirclesGenConfig c;
        c.seed = seed;
        return records_to_numpy(gen_circles(c));
      },
      py::arg("seed") = 0, "Returns (points, gold labels).");

  m.def(
      "cluster",
      [](const Points& x, const std::string& algorithm, std::size_t m_particles, double alpha, std::uint64_t seed,
         std::optional<std::size_t> m_prime, std::optional<double> surrogate_b, double mu0, double lambda,
         double a, double b, std::optional<Labels> gold) {
        RunConfig cfg;
        auto alg = parse_algorithm(algorithm);
        if (!alg) throw py::value_error("unknown algorithm `" + algorithm + "`");
        cfg.algorithm = *alg;
        cfg.m = m_particles;
        cfg.alpha = alpha;
        cfg.seed = seed;
        cfg.m_prime = m_prime;
        cfg.model = nig_spec(mu0, lambda, a, b);
        if (surrogate_b) cfg.surrogate = nig_spec(mu0, lambda, a, *surrogate_b);
        Dataset ds = points_dataset(x);
        if (gold) {
          if (gold->ndim() != 1 || gold->shape(0) != static_cast<py::ssize_t>(ds.size()))
            throw py::value_error("gold labels must match the points");
          auto g = gold->unchecked<1>();
          for (std::size_t i = 0; i < ds.size(); ++i) ds.gold[i] = std::to_string(g(i));
        }
        RunOutput out;
        {
          py::gil_scoped_release release;
          out = execute_run(cfg, std::move(ds));
        }
        return py::make_tuple(partition_labels(out.clustering),
                              py::module_::import("json").attr("loads")(summary_to_json(out.summary).dump()));
      },
      py::arg("x"), py::arg("algorithm") = "split-smc", py::arg("m") = 100, py::arg("alpha") = 1.0,
      py::arg("seed") = 0, py::arg("m_prime") = py::none(), py::arg("surrogate_b") = py::none(),
      py::arg("mu0") = 0.0, py::arg("lam") = 0.0002, py::arg("a") = 2.0, py::arg("b") = 0.5,
      py::arg("gold") = py::none(),
      "Clusters the rows of x under the NIG model; returns (labels, summary dict).");

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
}
