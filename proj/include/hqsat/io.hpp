#pragma once

// JSON model documents, CSV traces and static SVG plots.

#include "hqsat/capacity.hpp"
#include "hqsat/dagmm.hpp"
#include "hqsat/gmm.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace hqsat {

using Json = nlohmann::ordered_json;

/// {dim, weights, means, covariances, floor, trace:{loglik}}
Json gmm_to_json(const GmmModel& model, double floor = 0.0, const std::vector<double>& loglik = {});
GmmModel gmm_from_json(const Json& doc);

/// {layer_sizes, weights, biases, activation}; weights are row-major nested arrays.
Json mlp_to_json(const MlpParams& net);
MlpParams mlp_from_json(const Json& doc);
Json ae_to_json(const AeParams& ae);
AeParams ae_from_json(const Json& doc);

Json hyper_to_json(const DagmmHyper& h);
Json state_to_json(const DagmmState& s);
DagmmState state_from_json(const Json& doc);

void write_json(const Json& doc, const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

void write_loss_trace_csv(const std::vector<double>& loss, const std::filesystem::path& path);
void write_em_trace_csv(const EmTrace& trace, const std::filesystem::path& path);
void write_train_report_csv(const TrainReport& rep, const std::filesystem::path& path);
void write_labels_csv(const std::vector<int>& labels, const std::filesystem::path& path);
std::vector<int> read_labels_csv(const std::filesystem::path& path);

/// snr_db, rate_<m>... , stderr_<m>... for the methods present in the curve.
/// Absent cells are written as empty fields.
void write_curve_csv(const CapacityCurve& curve, const std::filesystem::path& path);

struct SvgOptions {
    std::string title;
    bool timestamp = true; ///< adds a generation-time comment
};

/// Three coordinate-pair projections (d0/d1, d0/d2, d1/d2) colored by label.
/// Extra panels rows can be stacked by passing several label sets.
std::string scatter_svg(const Matrix& data, const std::vector<std::vector<int>>& label_sets,
                        const std::vector<std::string>& captions, const SvgOptions& opts);

/// One polyline per method, rate versus SNR.
std::string curve_svg(const CapacityCurve& curve, const SvgOptions& opts);

/// Curve columns read back from a CSV written by write_curve_csv.
struct CurveTable {
    std::vector<std::string> methods;
    std::vector<double> snr_db;
    std::vector<std::vector<double>> rate; ///< [method][point], NaN when absent
};
CurveTable read_curve_csv(const std::filesystem::path& path);
std::string curve_svg(const CurveTable& table, const SvgOptions& opts);

void write_text(const std::string& text, const std::filesystem::path& path);

/// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace hqsat
