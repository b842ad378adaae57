#pragma once
// File formats.
//
//   fixations        JSON lines  {image_id, x, y, t, d}
//   transcripts      JSON array  [{text, begin, end, findings: [...]}, ...]
//   relation matrix  JSON object {finding: [anatomy, ...]}
//   anatomy boxes    JSON lines  {image_id, anatomy, left, top, right, bottom}
//   scanpaths        JSON lines  {image_id, finding, fixations: [[x, y, d], ...]}
//                    plus optional width / height of the native image
//
// A sample directory holds images.jsonl ({image_id, width, height}),
// fixations.jsonl, anatomy_boxes.jsonl, transcripts/<image_id>.json and,
// for the model, images/<image_id>.png.

#include "gazesearch/metrics.hpp"
#include "gazesearch/pipeline.hpp"
#include "gazesearch/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gazesearch::io {

namespace fs = std::filesystem;

// Single-record JSON encoding. decode<T>(encode(x)) == x for every type
// below; decode throws DataError on malformed input.
template <class T>
std::string encode(const T& value);
template <class T>
T decode(std::string_view text);

std::vector<Sample> load_samples(const fs::path& dir, const FindingVocabulary& vocabulary);
void save_samples(const fs::path& dir, std::span<const Sample> samples);

RelationMatrix load_relation_matrix(const fs::path& path);
void save_relation_matrix(const fs::path& path, const RelationMatrix& matrix);

// One finding name per line, or a JSON array of names.
FindingVocabulary load_vocabulary(const fs::path& path);

std::vector<Scanpath> load_scanpaths(const fs::path& path);
void save_scanpaths(const fs::path& path, std::span<const Scanpath> scanpaths);

void save_conversion_reports(const fs::path& path,
                             std::span<const pipeline::ConversionReport> reports);

// Fixed-schema summary: scanmatch_wo_dur, scanmatch_w_dur, mm_vector,
// mm_direction, mm_length, mm_position, mm_duration, sed, stde, n_pairs,
// params.
std::string report_json(const metrics::MetricReport& report);
void save_report_json(const fs::path& path, const metrics::MetricReport& report);
// Per-pair rows followed by a "mean" row.
void save_report_csv(const fs::path& path, const metrics::MetricReport& report);

struct ReportSummary {
    std::string name;
    double scanmatch_wo_dur = 0.0;
    double scanmatch_w_dur = 0.0;
    double mm_vector = 0.0;
    double mm_direction = 0.0;
    double mm_length = 0.0;
    double mm_position = 0.0;
    double mm_duration = 0.0;
    double sed = 0.0;
    double stde = 0.0;
    int n_pairs = 0;
};
ReportSummary load_report_summary(const fs::path& path, std::string name);

// Comparison table: Method | ScanMatch w/o Dur. | w/ Dur. | MultiMatch
// Vector, Direction, Length, Position, Duration | SED | STDE.
std::string render_table(std::span<const ReportSummary> rows);

}  // namespace gazesearch::io
