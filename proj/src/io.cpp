#include "morphguard/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "morphguard/error.hpp"

namespace morphguard {

using nlohmann::json;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw FormatError("bad number '" + s + "'", line_no);
    return v;
}

void expect_header(const std::vector<std::string>& lines, const std::string& header) {
    if (lines.empty() || lines.front() != header) throw FormatError("expected CSV header '" + header + "'", 0);
}

json parse_json(const std::string& text, const char* what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("malformed ") + what + ": " + e.what(), e.byte);
    }
}

}  // namespace

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) throw NumericInputError("cannot format number");
    return std::string(buf.data(), ptr);
}

std::string dataset_to_jsonl(const std::vector<Sample>& samples) {
    std::string out;
    for (const Sample& s : samples) {
        json j;
        j["kind"] = to_string(s.labels.kind);
        j["y_dot"] = s.labels.y_dot;
        j["y_ddot"] = s.labels.y_ddot;
        j["source_ids"] = s.source_ids;
        j["input"] = s.input;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Sample> dataset_from_jsonl(const std::string& text) {
    std::vector<Sample> out;
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        try {
            const json j = json::parse(lines[i]);
            Sample s;
            s.labels.kind = sample_kind_from_string(j.at("kind").get<std::string>().c_str());
            s.labels.y_dot = j.at("y_dot").get<int>();
            s.labels.y_ddot = j.at("y_ddot").get<int>();
            s.source_ids = j.at("source_ids").get<std::vector<int>>();
            s.input = j.at("input").get<Vec>();
            out.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw FormatError(std::string("bad dataset record: ") + e.what(), i + 1);
        }
    }
    return out;
}

std::string protocol_to_json(const MorphPairProtocol& protocol, const std::vector<int>& subset_of) {
    json arr = json::array();
    for (const MorphPair& p : protocol.pairs) {
        const auto subset = [&](int id) {
            if (id < 0 || static_cast<std::size_t>(id) >= subset_of.size()) throw IndexError("identity outside subset map");
            return subset_of[static_cast<std::size_t>(id)];
        };
        arr.push_back({{"identity_a", p.identity_a},
                       {"identity_b", p.identity_b},
                       {"sample_a", p.sample_a},
                       {"sample_b", p.sample_b},
                       {"subset_a", subset(p.identity_a)},
                       {"subset_b", subset(p.identity_b)}});
    }
    return arr.dump(1) + "\n";
}

MorphPairProtocol protocol_from_json(const std::string& text) {
    const json arr = parse_json(text, "protocol");
    if (!arr.is_array()) throw FormatError("protocol must be a JSON list", 0);
    MorphPairProtocol out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        try {
            const json& r = arr[i];
            if (r.at("subset_a").get<int>() == r.at("subset_b").get<int>())
                throw ProtocolError("protocol pair " + std::to_string(i) + " lies within one subset");
            out.pairs.push_back({r.at("identity_a").get<int>(), r.at("identity_b").get<int>(),
                                 r.at("sample_a").get<std::size_t>(), r.at("sample_b").get<std::size_t>()});
        } catch (const json::exception& e) {
            throw FormatError(std::string("bad protocol record: ") + e.what(), i);
        }
    }
    return out;
}

std::string scores_to_csv(const VerificationSet& set) {
    std::string out = "label,score\n";
    for (double s : set.genuine) out += "genuine," + format_double(s) + "\n";
    for (double s : set.impostor) out += "impostor," + format_double(s) + "\n";
    return out;
}

VerificationSet scores_from_csv(const std::string& text) {
    const auto lines = split_lines(text);
    expect_header(lines, "label,score");
    VerificationSet out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_fields(lines[i]);
        if (f.size() != 2) throw FormatError("expected 'label,score'", i);
        const double v = parse_double(f[1], i);
        if (f[0] == "genuine")
            out.genuine.push_back(v);
        else if (f[0] == "impostor")
            out.impostor.push_back(v);
        else
            throw FormatError("unknown score label '" + f[0] + "'", i);
    }
    return out;
}

std::string trials_to_json(const std::vector<MorphTrial>& trials) {
    json arr = json::array();
    for (const MorphTrial& t : trials) arr.push_back({{"morph_id", t.morph_id}, {"subject_scores", t.subject_scores}});
    return arr.dump(1) + "\n";
}

std::vector<MorphTrial> trials_from_json(const std::string& text) {
    const json arr = parse_json(text, "morph trials");
    if (!arr.is_array()) throw FormatError("morph trials must be a JSON list", 0);
    std::vector<MorphTrial> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        try {
            const json& id = arr[i].at("morph_id");
            MorphTrial t;
            t.morph_id = id.is_string() ? id.get<std::string>() : id.dump();
            t.subject_scores = arr[i].at("subject_scores").get<Vec>();
            out.push_back(std::move(t));
        } catch (const json::exception& e) {
            throw FormatError(std::string("bad morph trial: ") + e.what(), i);
        }
    }
    return out;
}

std::string curve_to_csv(const ThresholdCurve& curve) {
    std::string out = "threshold,value\n";
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i)
        out += format_double(curve.thresholds[i]) + "," + format_double(curve.values[i]) + "\n";
    return out;
}

ThresholdCurve curve_from_csv(const std::string& text) {
    const auto lines = split_lines(text);
    expect_header(lines, "threshold,value");
    ThresholdCurve out;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_fields(lines[i]);
        if (f.size() != 2) throw FormatError("expected 'threshold,value'", i);
        out.thresholds.push_back(parse_double(f[0], i));
        out.values.push_back(parse_double(f[1], i));
    }
    return out;
}

std::string report_to_csv(const std::vector<ReportRow>& rows) {
    std::string out = "metric,target,achieved,threshold,value\n";
    for (const ReportRow& r : rows)
        out += r.metric + "," + format_double(r.target) + "," + format_double(r.achieved) + "," +
               format_double(r.threshold) + "," + format_double(r.value) + "\n";
    return out;
}

std::string aligned_cloud_to_csv(const std::vector<AlignedTriplet>& aligned) {
    std::string out = "triplet_id,role,x,y\n";
    for (std::size_t i = 0; i < aligned.size(); ++i) {
        const auto id = std::to_string(i);
        const auto row = [&](const char* role, Point2 p) {
            out += id + "," + role + "," + format_double(p.x) + "," + format_double(p.y) + "\n";
        };
        row("bona_a", aligned[i].bona_a);
        row("bona_b", aligned[i].bona_b);
        row("morph", aligned[i].morph);
    }
    return out;
}

std::string ellipse_to_csv(const Ellipse& e) {
    return "W,H,S,orientation,center_x,center_y\n" + format_double(e.width) + "," + format_double(e.height) + "," +
           format_double(e.size) + "," + format_double(e.orientation) + "," + format_double(e.center.x) + "," +
           format_double(e.center.y) + "\n";
}

std::string render_svg(const std::vector<AlignedTriplet>& aligned, const Ellipse& e) {
    // Square view around the origin large enough for every point and the ellipse.
    double extent = 0.5 * std::max(e.width, e.height) + std::max(std::fabs(e.center.x), std::fabs(e.center.y));
    for (const auto& t : aligned)
        for (Point2 p : {t.bona_a, t.bona_b, t.morph}) extent = std::max({extent, std::fabs(p.x), std::fabs(p.y)});
    extent = extent > 0.0 ? 1.1 * extent : 1.0;

    constexpr double kSize = 600.0;
    const double k = kSize / (2.0 * extent);
    const auto sx = [&](double x) { return format_double(kSize / 2.0 + k * x); };
    const auto sy = [&](double y) { return format_double(kSize / 2.0 - k * y); };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"600\" viewBox=\"0 0 600 600\">\n";
    out += "<rect width=\"600\" height=\"600\" fill=\"white\"/>\n";
    out += "<line x1=\"0\" y1=\"300\" x2=\"600\" y2=\"300\" stroke=\"#ccc\"/>\n";
    out += "<line x1=\"300\" y1=\"0\" x2=\"300\" y2=\"600\" stroke=\"#ccc\"/>\n";
    const auto circle = [&](Point2 p, const char* role, const char* colour) {
        out += "<circle class=\"" + std::string(role) + "\" cx=\"" + sx(p.x) + "\" cy=\"" + sy(p.y) +
               "\" r=\"2\" fill=\"" + colour + "\"/>\n";
    };
    for (const auto& t : aligned) {
        circle(t.bona_a, "bona_a", "#1f77b4");
        circle(t.bona_b, "bona_b", "#2ca02c");
        circle(t.morph, "morph", "#d62728");
    }
    // SVG y grows downwards, so the rotation sign flips.
    const double degrees = -e.orientation * 180.0 / std::numbers::pi;
    out += "<ellipse cx=\"" + sx(e.center.x) + "\" cy=\"" + sy(e.center.y) + "\" rx=\"" + format_double(k * e.width / 2.0) +
           "\" ry=\"" + format_double(k * e.height / 2.0) + "\" transform=\"rotate(" + format_double(degrees) + " " +
           sx(e.center.x) + " " + sy(e.center.y) + ")\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    out += "</svg>\n";
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << contents;
    if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace morphguard
