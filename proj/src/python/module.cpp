// Python bindings for the core operations: vector math, clustering,
// assignment, retrieval metrics, and the config-driven training entry points.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mcrn/assignment.hpp"
#include "mcrn/clustering.hpp"
#include "mcrn/config.hpp"
#include "mcrn/eval.hpp"
#include "mcrn/harness.hpp"
#include "mcrn/numerics.hpp"

namespace py = pybind11;

namespace {

py::dict record_to_dict(const mcrn::MetricsRecord& r) {
  py::dict d;
  d["epoch"] = r.epoch;
  d["mean_loss"] = r.mean_loss;
  d["map"] = r.mean_ap;
  d["cmc1"] = r.cmc1;
  d["cmc5"] = r.cmc5;
  d["cmc10"] = r.cmc10;
  d["purity"] = r.purity;
  d["n_target_classes"] = r.n_target_classes;
  d["domain_distance"] = r.domain_distance;
  return d;
}

std::vector<mcrn::RetrievalItem> to_items(
    const std::vector<mcrn::FeatureVector>& features,
    const std::vector<int>& identities, const std::vector<int>& record_ids,
    const char* what) {
  if (features.size() != identities.size()) {
    throw std::invalid_argument(std::string(what) +
                                ": features and identities differ in length");
  }
  if (!record_ids.empty() && record_ids.size() != features.size()) {
    throw std::invalid_argument(std::string(what) +
                                ": record_ids has the wrong length");
  }
  std::vector<mcrn::RetrievalItem> items;
  items.reserve(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    items.push_back({features[i], identities[i],
                     record_ids.empty() ? -1 : record_ids[i]});
  }
  return items;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Multi-centroid contrastive training core: numerics, clustering, "
      "assignment, retrieval metrics, and config-driven experiment runs.";

  m.def("l2_normalize", &mcrn::l2_normalize, py::arg("v"),
        "Unit-normalize a vector (already-unit input comes back unchanged).");
  m.def("cosine_sim", &mcrn::cosine_sim, py::arg("a"), py::arg("b"),
        "Dot product of two unit vectors.");

  m.def(
      "dbscan",
      [](const std::vector<mcrn::FeatureVector>& features, double eps,
         int min_pts) {
        const mcrn::ClusterLabeling out = mcrn::dbscan(features, eps, min_pts);
        return py::make_tuple(out.assignment, out.n_clusters);
      },
      py::arg("features"), py::arg("eps"), py::arg("min_pts"),
      "Density clustering under cosine distance on unit vectors. Returns "
      "(labels, n_clusters); noise points get label -1.");

  m.def("hungarian_max", &mcrn::hungarian_max, py::arg("score"),
        "Maximum-score square assignment; returns the column for each row.");
  m.def("assignment_score", &mcrn::assignment_score, py::arg("score"),
        py::arg("mapping"), "Objective value of an assignment.");

  m.def(
      "map_cmc",
      [](const std::vector<mcrn::FeatureVector>& query_features,
         const std::vector<int>& query_ids,
         const std::vector<mcrn::FeatureVector>& gallery_features,
         const std::vector<int>& gallery_ids, int max_rank,
         const std::vector<int>& query_records,
         const std::vector<int>& gallery_records) {
        mcrn::RetrievalProtocol protocol;
        protocol.queries =
            to_items(query_features, query_ids, query_records, "queries");
        protocol.gallery =
            to_items(gallery_features, gallery_ids, gallery_records,
                     "gallery");
        const mcrn::RetrievalResult res = mcrn::map_cmc(protocol, max_rank);
        py::dict d;
        d["mean_ap"] = res.mean_ap;
        d["cmc"] = res.cmc;
        d["evaluated"] = res.evaluated;
        d["skipped"] = res.skipped;
        return d;
      },
      py::arg("query_features"), py::arg("query_ids"),
      py::arg("gallery_features"), py::arg("gallery_ids"),
      py::arg("max_rank") = 10, py::arg("query_records") = std::vector<int>{},
      py::arg("gallery_records") = std::vector<int>{},
      "Mean average precision and CMC curve for a retrieval protocol. "
      "Matching query/gallery record ids exclude the gallery item for that "
      "query; omit the record lists to disable exclusion.");

  m.def(
      "canonical_config",
      [](const std::string& text) {
        return mcrn::canonical_config(mcrn::parse_config_text(text));
      },
      py::arg("text"),
      "Parse a key = value config and return its canonical form with every "
      "default filled in.");

  m.def(
      "config_hash",
      [](const std::string& text) {
        return mcrn::config_hash(mcrn::parse_config_text(text));
      },
      py::arg("text"), "Hash of the canonical config form.");

  m.def(
      "run_experiment",
      [](const std::string& config_text) {
        const mcrn::ExperimentConfig config =
            mcrn::parse_config_text(config_text);
        mcrn::RunResult result;
        {
          py::gil_scoped_release release;
          result = mcrn::run_experiment(config);
        }
        py::list records;
        for (const auto& r : result.records) records.append(record_to_dict(r));
        return records;
      },
      py::arg("config_text"),
      "Run a full training experiment from config text; returns one metrics "
      "dict per epoch.");

  m.def(
      "sweep",
      [](const std::string& config_text, const std::string& param,
         const std::vector<double>& values) {
        const mcrn::ExperimentConfig config =
            mcrn::parse_config_text(config_text);
        py::gil_scoped_release release;
        return mcrn::sweep(config, param, values);
      },
      py::arg("config_text"), py::arg("param"), py::arg("values"),
      "One run per value of 'k' or 'alpha'; returns CSV of final metrics.");

  m.def(
      "ablate",
      [](const std::string& config_text, const std::string& preset,
         int n_seeds) {
        const mcrn::ExperimentConfig config =
            mcrn::parse_config_text(config_text);
        py::gil_scoped_release release;
        return mcrn::ablate(config, preset, n_seeds);
      },
      py::arg("config_text"), py::arg("preset"), py::arg("n_seeds"),
      "Run a named comparison suite (table1, table2, table3, dscl); returns "
      "CSV with per-seed rows and a median row per arm.");

  m.def(
      "evaluate_checkpoint",
      [](const std::string& config_text, const std::string& path) {
        const mcrn::ExperimentConfig config =
            mcrn::parse_config_text(config_text);
        mcrn::MetricsRecord record;
        {
          py::gil_scoped_release release;
          record = mcrn::evaluate_checkpoint(config, path);
        }
        return record_to_dict(record);
      },
      py::arg("config_text"), py::arg("checkpoint_path"),
      "Load a checkpointed encoder and evaluate it once without training.");
}
