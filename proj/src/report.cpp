#include "banditseq/errors.hpp"
#include "banditseq/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace banditseq {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kMargin = 50.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += "\"\"";
        } else if (c == '\n' || c == '\r') {
            out += ' ';
        } else {
            out += c;
        }
    }
    return out + "\"";
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        case '"':
            out += "&quot;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

struct Frame {
    double x_min, x_max, y_min, y_max;
    double px(double x) const {
        const double span = x_max > x_min ? x_max - x_min : 1.0;
        return kMargin + (x - x_min) / span * (kWidth - 2 * kMargin);
    }
    double py(double y) const {
        const double span = y_max > y_min ? y_max - y_min : 1.0;
        return kHeight - kMargin - (y - y_min) / span * (kHeight - 2 * kMargin);
    }
};

void svg_open(std::ostream& out, std::string_view title, std::string_view x_label,
              std::string_view y_label, const Frame& f) {
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << xml_escape(title) << "</text>\n"
        << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin
        << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
        << kHeight - kMargin << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
        << xml_escape(x_label) << "</text>\n"
        << "<text x=\"14\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 "
        << kHeight / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
    const double ticks[] = {f.y_min, (f.y_min + f.y_max) / 2, f.y_max};
    for (double t : ticks) {
        out << "<text x=\"" << kMargin - 4 << "\" y=\"" << f.py(t) + 4
            << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(t).substr(0, 6) << "</text>\n";
    }
    const double xticks[] = {f.x_min, f.x_max};
    for (double t : xticks) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", t);
        out << "<text x=\"" << f.px(t) << "\" y=\"" << kHeight - kMargin + 14
            << "\" text-anchor=\"middle\" font-size=\"10\">" << buf << "</text>\n";
    }
}

void write_records_csv(std::span<const RunRecord> records, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    out << "seed,phase,epoch,step,online_reward,sentence_bleu,heldout_bleu,critic_loss,wall_seconds,note\n";
    for (const RunRecord& r : records) {
        out << r.seed << ',' << r.phase << ',' << r.epoch << ',' << r.step << ',' << fmt(r.online_reward)
            << ',' << fmt(r.sentence_bleu) << ',' << fmt_opt(r.heldout_bleu) << ','
            << fmt_opt(r.critic_loss) << ',' << fmt(r.wall_seconds) << ',' << quote(r.note) << '\n';
    }
    finish(out, path);
}

void write_reward_svg(std::span<const RunRecord> records, const std::filesystem::path& path) {
    std::map<std::uint64_t, std::vector<std::pair<double, double>>> series;
    for (const RunRecord& r : records) {
        auto& pts = series[r.seed];
        if (r.phase == "bandit") {
            pts.emplace_back(static_cast<double>(r.step), r.online_reward);
        }
    }
    Frame f{0.0, 1.0, 0.0, 1.0};
    for (const auto& [_, pts] : series) {
        for (const auto& [x, y] : pts) {
            f.x_max = std::max(f.x_max, x);
            f.y_max = std::max(f.y_max, y);
        }
    }
    std::ofstream out = open_for_write(path);
    svg_open(out, "online reward during bandit learning", "step", "online reward (running mean)", f);
    std::size_t k = 0;
    for (const auto& [seed, pts] : series) {
        out << "<polyline fill=\"none\" stroke=\"" << kPalette[k++ % std::size(kPalette)]
            << "\" stroke-width=\"1.5\" data-seed=\"" << seed << "\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i) {
            out << (i ? " " : "") << fmt(f.px(pts[i].first)) << ',' << fmt(f.py(pts[i].second));
        }
        out << "\"/>\n";
    }
    out << "</svg>\n";
    finish(out, path);
}

} // namespace

void emit_report(std::span<const RunRecord> records, ReportFormat format, const std::filesystem::path& path) {
    if (format == ReportFormat::csv) {
        write_records_csv(records, path);
    } else {
        write_reward_svg(records, path);
    }
}

void write_summary_csv(std::span<const SummaryRow> rows, const std::filesystem::path& path) {
    std::ofstream out = open_for_write(path);
    out << "experiment_id,preset,seed,metric,phase,value,ci_low,ci_high\n";
    for (const SummaryRow& r : rows) {
        out << r.experiment_id << ',' << r.preset << ',' << r.seed << ',' << r.metric << ',' << r.phase
            << ',' << fmt(r.value) << ',' << fmt_opt(r.ci_low) << ',' << fmt_opt(r.ci_high) << '\n';
    }
    finish(out, path);
}

std::vector<RunRecord> read_records_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw IoError(path.string() + " is empty");
    }
    std::vector<RunRecord> out;
    std::size_t line_no = 1;
    auto opt = [](const std::string& s) -> std::optional<double> {
        if (s.empty()) {
            return std::nullopt;
        }
        return std::stod(s);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != 10) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 10 fields");
        }
        try {
            RunRecord r;
            r.seed = std::stoull(f[0]);
            r.phase = f[1];
            r.epoch = std::stoull(f[2]);
            r.step = std::stoull(f[3]);
            r.online_reward = std::stod(f[4]);
            r.sentence_bleu = std::stod(f[5]);
            r.heldout_bleu = opt(f[6]);
            r.critic_loss = opt(f[7]);
            r.wall_seconds = std::stod(f[8]);
            r.note = f[9];
            out.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
        }
    }
    return out;
}

void write_sweep_svg(std::span<const SweepPoint> points, std::string_view parameter,
                     std::string_view metric, const std::filesystem::path& path) {
    Frame f{0.0, 1.0, 0.0, 0.0};
    if (!points.empty()) {
        f.x_min = f.x_max = points.front().x;
        f.y_min = f.y_max = points.front().delta.mean;
    }
    for (const SweepPoint& p : points) {
        f.x_min = std::min(f.x_min, p.x);
        f.x_max = std::max(f.x_max, p.x);
        f.y_min = std::min({f.y_min, p.delta.low(), 0.0});
        f.y_max = std::max({f.y_max, p.delta.high(), 0.0});
    }
    std::ofstream out = open_for_write(path);
    const std::string title = "delta " + std::string(metric) + " vs " + std::string(parameter);
    svg_open(out, title, parameter, "delta " + std::string(metric), f);
    out << "<line x1=\"" << kMargin << "\" y1=\"" << fmt(f.py(0.0)) << "\" x2=\"" << kWidth - kMargin
        << "\" y2=\"" << fmt(f.py(0.0)) << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
        out << (i ? " " : "") << fmt(f.px(points[i].x)) << ',' << fmt(f.py(points[i].delta.mean));
    }
    out << "\"/>\n";
    for (const SweepPoint& p : points) {
        const double x = f.px(p.x);
        out << "<line class=\"whisker\" x1=\"" << fmt(x) << "\" y1=\"" << fmt(f.py(p.delta.low()))
            << "\" x2=\"" << fmt(x) << "\" y2=\"" << fmt(f.py(p.delta.high()))
            << "\" stroke=\"#1f77b4\"/>\n"
            << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(f.py(p.delta.mean))
            << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    }
    out << "</svg>\n";
    finish(out, path);
}

} // namespace banditseq
