#include "gazesearch/io.hpp"

#include "gazesearch/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

namespace gazesearch {

using nlohmann::json;

void to_json(json& j, const FreeViewFixation& f) { j = {{"x", f.x}, {"y", f.y}, {"t", f.t}, {"d", f.d}}; }
void from_json(const json& j, FreeViewFixation& f) {
    f.x = j.at("x").get<double>();
    f.y = j.at("y").get<double>();
    f.t = j.at("t").get<double>();
    f.d = j.at("d").get<double>();
}

void to_json(json& j, const Fixation& f) { j = json::array({f.x, f.y, f.d}); }
void from_json(const json& j, Fixation& f) {
    if (!j.is_array() || j.size() != 3) throw DataError("fixation must be [x, y, d]");
    f = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

void to_json(json& j, const FindingLabel& f) { j = f.name; }
void from_json(const json& j, FindingLabel& f) { f.name = j.get<std::string>(); }

void to_json(json& j, const TranscriptSentence& s) {
    j = {{"text", s.text}, {"begin", s.begin}, {"end", s.end}, {"findings", s.findings}};
}
void from_json(const json& j, TranscriptSentence& s) {
    s.text = j.value("text", std::string{});
    s.begin = j.at("begin").get<double>();
    s.end = j.at("end").get<double>();
    s.findings = j.at("findings").get<std::vector<FindingLabel>>();
}

void to_json(json& j, const Box& b) {
    j = {{"left", b.left}, {"top", b.top}, {"right", b.right}, {"bottom", b.bottom}};
}
void from_json(const json& j, Box& b) {
    b.left = j.at("left").get<double>();
    b.top = j.at("top").get<double>();
    b.right = j.at("right").get<double>();
    b.bottom = j.at("bottom").get<double>();
}

void to_json(json& j, const BoundingBoxSet& b) { j = {{"finding", b.finding}, {"boxes", b.boxes}}; }
void from_json(const json& j, BoundingBoxSet& b) {
    b.finding = j.at("finding").get<FindingLabel>();
    b.boxes = j.at("boxes").get<std::vector<Box>>();
}

void to_json(json& j, const RelationMatrix& m) { j = m.anatomies; }
void from_json(const json& j, RelationMatrix& m) {
    m.anatomies = j.get<std::map<std::string, std::vector<std::string>>>();
}

void to_json(json& j, const Sample& s) {
    j = {{"image_id", s.image_id},     {"width", s.width},
         {"height", s.height},         {"fixations", s.fixations},
         {"transcript", s.transcript}, {"anatomy_boxes", s.anatomy_boxes}};
}
void from_json(const json& j, Sample& s) {
    s.image_id = j.at("image_id").get<std::string>();
    s.width = j.at("width").get<double>();
    s.height = j.at("height").get<double>();
    s.fixations = j.at("fixations").get<std::vector<FreeViewFixation>>();
    s.transcript = j.at("transcript").get<std::vector<TranscriptSentence>>();
    s.anatomy_boxes = j.at("anatomy_boxes").get<std::map<std::string, Box>>();
}

void to_json(json& j, const Scanpath& s) {
    j = {{"image_id", s.image_id}, {"finding", s.finding}, {"fixations", s.fixations}};
    if (s.width > 0.0) j["width"] = s.width;
    if (s.height > 0.0) j["height"] = s.height;
}
void from_json(const json& j, Scanpath& s) {
    s.image_id = j.at("image_id").get<std::string>();
    s.finding = j.at("finding").get<FindingLabel>();
    s.fixations = j.at("fixations").get<std::vector<Fixation>>();
    s.width = j.value("width", 0.0);
    s.height = j.value("height", 0.0);
}

}  // namespace gazesearch

namespace gazesearch::io {

namespace {

std::string anchor(const fs::path& path, std::size_t line) {
    return path.string() + ":" + std::to_string(line) + ": ";
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

// Calls fn(json, line_number) for each non-blank line; parse and field
// errors are rethrown as DataError anchored at the line.
template <class Fn>
void for_each_json_line(const fs::path& path, Fn fn) {
    auto in = open_in(path);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            fn(json::parse(line), number);
        } catch (const json::exception& e) {
            throw DataError(anchor(path, number) + e.what());
        } catch (const DataError& e) {
            throw DataError(anchor(path, number) + e.what());
        }
    }
}

json read_json_file(const fs::path& path) {
    auto in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace

template <class T>
std::string encode(const T& value) {
    return json(value).dump();
}

template <class T>
T decode(std::string_view text) {
    try {
        return json::parse(text).get<T>();
    } catch (const json::exception& e) {
        throw DataError(e.what());
    }
}

#define GAZESEARCH_CODEC(T)                      \
    template std::string encode<T>(const T&);    \
    template T decode<T>(std::string_view);
GAZESEARCH_CODEC(FreeViewFixation)
GAZESEARCH_CODEC(Fixation)
GAZESEARCH_CODEC(FindingLabel)
GAZESEARCH_CODEC(TranscriptSentence)
GAZESEARCH_CODEC(Box)
GAZESEARCH_CODEC(BoundingBoxSet)
GAZESEARCH_CODEC(RelationMatrix)
GAZESEARCH_CODEC(Sample)
GAZESEARCH_CODEC(Scanpath)
#undef GAZESEARCH_CODEC

std::vector<Sample> load_samples(const fs::path& dir, const FindingVocabulary& vocabulary) {
    std::vector<Sample> samples;
    std::map<std::string, std::size_t> index;
    std::map<std::string, std::size_t> declared_at;

    const auto images = dir / "images.jsonl";
    for_each_json_line(images, [&](const json& j, std::size_t line) {
        Sample s;
        s.image_id = j.at("image_id").get<std::string>();
        s.width = j.at("width").get<double>();
        s.height = j.at("height").get<double>();
        if (index.count(s.image_id)) throw DataError("duplicate image_id '" + s.image_id + "'");
        index[s.image_id] = samples.size();
        declared_at[s.image_id] = line;
        samples.push_back(std::move(s));
    });

    auto lookup = [&](const json& j) -> Sample& {
        const auto id = j.at("image_id").get<std::string>();
        auto it = index.find(id);
        if (it == index.end()) throw DataError("image_id '" + id + "' not declared in images.jsonl");
        return samples[it->second];
    };

    for_each_json_line(dir / "fixations.jsonl", [&](const json& j, std::size_t) {
        lookup(j).fixations.push_back(j.get<FreeViewFixation>());
    });

    for_each_json_line(dir / "anatomy_boxes.jsonl", [&](const json& j, std::size_t) {
        Sample& s = lookup(j);
        s.anatomy_boxes[j.at("anatomy").get<std::string>()] = j.get<Box>();
    });

    for (auto& s : samples) {
        const auto path = dir / "transcripts" / (s.image_id + ".json");
        if (fs::exists(path)) {
            try {
                s.transcript = read_json_file(path).get<std::vector<TranscriptSentence>>();
            } catch (const json::exception& e) {
                throw DataError(path.string() + ": " + e.what());
            }
        }
        if (auto violations = validate_sample(s, vocabulary); !violations.empty()) {
            throw DataError(anchor(images, declared_at[s.image_id]) + "sample '" + s.image_id +
                            "' rejected: " + violations.front());
        }
    }
    return samples;
}

void save_samples(const fs::path& dir, std::span<const Sample> samples) {
    fs::create_directories(dir / "transcripts");
    auto images = open_out(dir / "images.jsonl");
    auto fixations = open_out(dir / "fixations.jsonl");
    auto boxes = open_out(dir / "anatomy_boxes.jsonl");
    for (const auto& s : samples) {
        images << json{{"image_id", s.image_id}, {"width", s.width}, {"height", s.height}}.dump()
               << '\n';
        for (const auto& f : s.fixations) {
            json j = f;
            j["image_id"] = s.image_id;
            fixations << j.dump() << '\n';
        }
        for (const auto& [name, b] : s.anatomy_boxes) {
            json j = b;
            j["image_id"] = s.image_id;
            j["anatomy"] = name;
            boxes << j.dump() << '\n';
        }
        auto t = open_out(dir / "transcripts" / (s.image_id + ".json"));
        t << json(s.transcript).dump(2) << '\n';
    }
}

RelationMatrix load_relation_matrix(const fs::path& path) {
    try {
        return read_json_file(path).get<RelationMatrix>();
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_relation_matrix(const fs::path& path, const RelationMatrix& matrix) {
    auto out = open_out(path);
    out << json(matrix).dump(2) << '\n';
}

FindingVocabulary load_vocabulary(const fs::path& path) {
    auto in = open_in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    std::vector<std::string> names;
    if (first != std::string::npos && text[first] == '[') {
        try {
            names = json::parse(text).get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    } else {
        std::istringstream lines(text);
        std::string line;
        while (std::getline(lines, line)) {
            const auto b = line.find_first_not_of(" \t\r");
            if (b == std::string::npos || line[b] == '#') continue;
            const auto e = line.find_last_not_of(" \t\r");
            names.push_back(line.substr(b, e - b + 1));
        }
    }
    if (names.empty()) throw DataError(path.string() + ": empty vocabulary");
    try {
        return FindingVocabulary(std::move(names));
    } catch (const std::invalid_argument& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::vector<Scanpath> load_scanpaths(const fs::path& path) {
    std::vector<Scanpath> out;
    for_each_json_line(path, [&](const json& j, std::size_t) {
        auto s = j.get<Scanpath>();
        if (s.fixations.empty()) throw DataError("scanpath has no fixations");
        out.push_back(std::move(s));
    });
    return out;
}

void save_scanpaths(const fs::path& path, std::span<const Scanpath> scanpaths) {
    auto out = open_out(path);
    for (const auto& s : scanpaths) out << json(s).dump() << '\n';
}

void save_conversion_reports(const fs::path& path,
                             std::span<const pipeline::ConversionReport> reports) {
    auto out = open_out(path);
    for (const auto& r : reports) {
        json skipped = json::object();
        for (auto reason : {SkipReason::NotMentioned, SkipReason::NoFixationsBeforeCutoff,
                            SkipReason::NoAnatomyBoxes, SkipReason::NoTargetFixation,
                            SkipReason::Unconstrainable}) {
            auto it = r.skipped.find(reason);
            skipped[to_string(reason)] = it == r.skipped.end() ? 0 : it->second;
        }
        out << json{{"image_id", r.image_id}, {"emitted", r.emitted}, {"skipped", skipped}}.dump()
            << '\n';
    }
}

namespace {

nlohmann::ordered_json params_json(const metrics::MetricReport& report) {
    const auto& p = report.params;
    using ojson = nlohmann::ordered_json;
    ojson threshold = p.scanmatch.substitution_threshold
                          ? ojson(*p.scanmatch.substitution_threshold)
                          : ojson("diagonal/4");
    return {
        {"scanmatch",
         {{"cols", p.scanmatch.cols},
          {"rows", p.scanmatch.rows},
          {"substitution_threshold", threshold},
          {"gap_penalty", p.scanmatch.gap_penalty},
          {"duration_bin", p.scanmatch.duration_bin}}},
        {"sed", {{"cols", p.sed_cols}, {"rows", p.sed_rows}}},
        {"stde", {{"k", p.stde_k}, {"direction", "prediction->reference"}}},
        {"multimatch",
         {{"simplify", p.multimatch_simplify},
          {"simplify_amplitude", p.simplify_amplitude},
          {"simplify_direction", p.simplify_direction},
          {"n_pairs", report.n_multimatch}}},
        {"unmatched_references", report.unmatched_references},
    };
}

nlohmann::ordered_json mm_value(const metrics::MetricReport& r, double v) {
    return r.n_multimatch > 0 ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

std::string opt_cell(const std::optional<double>& v) {
    if (!v) return "";
    std::ostringstream os;
    os << std::setprecision(17) << *v;
    return os.str();
}

}  // namespace

std::string report_json(const metrics::MetricReport& r) {
    nlohmann::ordered_json j = {
        {"scanmatch_wo_dur", r.scanmatch_wo_dur},
        {"scanmatch_w_dur", r.scanmatch_w_dur},
        {"mm_vector", mm_value(r, r.mm_vector)},
        {"mm_direction", mm_value(r, r.mm_direction)},
        {"mm_length", mm_value(r, r.mm_length)},
        {"mm_position", mm_value(r, r.mm_position)},
        {"mm_duration", mm_value(r, r.mm_duration)},
        {"sed", r.sed},
        {"stde", r.stde},
        {"n_pairs", r.n_pairs},
        {"params", params_json(r)},
    };
    return j.dump(2);
}

void save_report_json(const fs::path& path, const metrics::MetricReport& report) {
    auto out = open_out(path);
    out << report_json(report) << '\n';
}

void save_report_csv(const fs::path& path, const metrics::MetricReport& r) {
    auto out = open_out(path);
    out << std::setprecision(17);
    out << "image_id,finding,scanmatch_wo_dur,scanmatch_w_dur,mm_vector,mm_direction,mm_length,"
           "mm_position,mm_duration,sed,stde\n";
    auto quoted = [](const std::string& s) {
        if (s.find_first_of(",\"") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    };
    for (const auto& p : r.pairs) {
        out << quoted(p.image_id) << ',' << quoted(p.finding) << ',' << p.scanmatch_wo_dur << ','
            << p.scanmatch_w_dur << ',' << opt_cell(p.multimatch.vector) << ','
            << opt_cell(p.multimatch.direction) << ',' << opt_cell(p.multimatch.length) << ','
            << opt_cell(p.multimatch.position) << ',' << opt_cell(p.multimatch.duration) << ','
            << p.sed << ',' << p.stde << '\n';
    }
    auto mm = [&](double v) { return r.n_multimatch > 0 ? opt_cell(v) : std::string{}; };
    out << "mean,," << r.scanmatch_wo_dur << ',' << r.scanmatch_w_dur << ',' << mm(r.mm_vector)
        << ',' << mm(r.mm_direction) << ',' << mm(r.mm_length) << ',' << mm(r.mm_position) << ','
        << mm(r.mm_duration) << ',' << r.sed << ',' << r.stde << '\n';
}

ReportSummary load_report_summary(const fs::path& path, std::string name) {
    const json j = read_json_file(path);
    auto num = [&](const char* key) {
        if (!j.contains(key)) throw DataError(path.string() + ": missing key '" + key + "'");
        const auto& v = j.at(key);
        if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
        if (!v.is_number()) throw DataError(path.string() + ": key '" + key + "' is not a number");
        return v.get<double>();
    };
    ReportSummary s;
    s.name = std::move(name);
    s.scanmatch_wo_dur = num("scanmatch_wo_dur");
    s.scanmatch_w_dur = num("scanmatch_w_dur");
    s.mm_vector = num("mm_vector");
    s.mm_direction = num("mm_direction");
    s.mm_length = num("mm_length");
    s.mm_position = num("mm_position");
    s.mm_duration = num("mm_duration");
    s.sed = num("sed");
    s.stde = num("stde");
    s.n_pairs = static_cast<int>(num("n_pairs"));
    return s;
}

std::string render_table(std::span<const ReportSummary> rows) {
    auto cell = [](double v) {
        if (std::isnan(v)) return std::string("-");
        std::ostringstream os;
        os << std::fixed << std::setprecision(4) << v;
        return os.str();
    };
    std::size_t name_width = 6;
    for (const auto& r : rows) name_width = std::max(name_width, r.name.size());

    std::ostringstream os;
    auto pad = [&](const std::string& s) {
        return s + std::string(name_width > s.size() ? name_width - s.size() : 0, ' ');
    };
    os << "| " << pad("") << " | ScanMatch  |            | MultiMatch |           |        |      "
          "    |          | SED    | STDE   |\n";
    os << "| " << pad("Method") << " | w/o Dur.   | w/ Dur.    | Vector     | Direction | Length | "
          "Position | Duration |        |        |\n";
    os << "|-" << std::string(name_width, '-')
       << "-|------------|------------|------------|-----------|--------|----------|----------|----"
          "----|--------|\n";
    auto col = [](const std::string& s, std::size_t w) {
        return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
    };
    for (const auto& r : rows) {
        os << "| " << pad(r.name) << " | " << col(cell(r.scanmatch_wo_dur), 10) << " | "
           << col(cell(r.scanmatch_w_dur), 10) << " | " << col(cell(r.mm_vector), 10) << " | "
           << col(cell(r.mm_direction), 9) << " | " << col(cell(r.mm_length), 6) << " | "
           << col(cell(r.mm_position), 8) << " | " << col(cell(r.mm_duration), 8) << " | "
           << col(cell(r.sed), 6) << " | " << col(cell(r.stde), 6) << " |\n";
    }
    return os.str();
}

}  // namespace gazesearch::io
