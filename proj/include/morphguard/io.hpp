#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "morphguard/datagen.hpp"
#include "morphguard/featviz.hpp"
#include "morphguard/metrics.hpp"
#include "morphguard/sample.hpp"

namespace morphguard {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

// Dataset: one JSON object per line,
//   {"kind": "...", "y_dot": int, "y_ddot": int, "source_ids": [...], "input": [f64, ...]}
std::string dataset_to_jsonl(const std::vector<Sample>& samples);
std::vector<Sample> dataset_from_jsonl(const std::string& text);

// Protocol: JSON list of {"identity_a", "identity_b", "sample_a", "sample_b", "subset_a", "subset_b"}.
std::string protocol_to_json(const MorphPairProtocol& protocol, const std::vector<int>& subset_of);
MorphPairProtocol protocol_from_json(const std::string& text);

// Score ingestion: CSV "label,score" with label genuine | impostor.
std::string scores_to_csv(const VerificationSet& set);
VerificationSet scores_from_csv(const std::string& text);

// Morph trials: JSON list of {"morph_id": ..., "subject_scores": [...]}.
std::string trials_to_json(const std::vector<MorphTrial>& trials);
std::vector<MorphTrial> trials_from_json(const std::string& text);

/// CSV "threshold,value".
std::string curve_to_csv(const ThresholdCurve& curve);
ThresholdCurve curve_from_csv(const std::string& text);

/// One row of the operating-point report "metric,target,achieved,threshold,value".
struct ReportRow {
    std::string metric;
    double target = 0.0;
    double achieved = 0.0;
    double threshold = 0.0;
    double value = 0.0;
};
std::string report_to_csv(const std::vector<ReportRow>& rows);

/// CSV "triplet_id,role,x,y".
std::string aligned_cloud_to_csv(const std::vector<AlignedTriplet>& aligned);
/// CSV "W,H,S,orientation,center_x,center_y".
std::string ellipse_to_csv(const Ellipse& e);
/// Standalone SVG: every aligned point as a <circle>, the ellipse as one <ellipse>.
std::string render_svg(const std::vector<AlignedTriplet>& aligned, const Ellipse& e);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace morphguard
