#include "inril/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "inril/errors.hpp"
#include "inril/text_io.hpp"

namespace inril {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string csv_number(double v) {
    if (!std::isfinite(v)) return "";
    return format_double(v);
}

std::string xml_escape(const std::string& in) {
    std::string out;
    for (char ch : in) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string csv_optional(const std::optional<double>& v) { return v ? csv_number(*v) : std::string(); }

}  // namespace

// ------------------------------------------------------------ run log

json json_number(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

json cycle_record_json(const CycleRecord& rec, std::optional<double> wall_time) {
    json j;
    j["type"] = "cycle";
    j["cycle"] = rec.cycle;
    j["pattern"] = rec.pattern;
    j["m_used"] = rec.m_used;
    j["env_steps"] = rec.env_steps;
    j["updates"] = rec.updates;
    j["il_updates"] = rec.il_updates;
    j["rl_updates"] = rec.rl_updates;
    j["mean_return"] = json_number(rec.mean_return);
    j["success_rate"] = json_number(rec.success_rate);
    j["il_loss"] = json_number(rec.il_loss);
    j["rho"] = json_number(rec.rho);
    j["grad_norm_il"] = json_number(rec.grad_norm_il);
    j["grad_norm_rl"] = json_number(rec.grad_norm_rl);
    j["m_sqrt_rule"] = json_number(rec.m_sqrt_rule);
    j["m_balance_rule"] = json_number(rec.m_balance_rule);
    if (rec.eval_return) j["eval_return"] = json_number(*rec.eval_return);
    if (rec.eval_success) j["eval_success"] = json_number(*rec.eval_success);
    if (wall_time) j["wall_time"] = *wall_time;
    return j;
}

RunLogWriter::RunLogWriter(const std::filesystem::path& path, const std::string& command, const RunConfig& cfg,
                           const json& inputs)
    : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw FileError("cannot open log " + path.string() + " for writing");
    json h;
    h["type"] = "header";
    h["tool"] = "inril";
    h["version"] = kCodeVersion;
    h["command"] = command;
    h["seed"] = cfg.seed;
    h["config"] = to_json(cfg);
    h["inputs"] = inputs;
    out_ << h.dump() << '\n';
    out_.flush();
}

void RunLogWriter::write(const json& record) {
    out_ << record.dump() << '\n';
    out_.flush();
    if (!out_) throw FileError("write to " + path_.string() + " failed");
    ++count_;
}

void RunLogWriter::write_cycle(const CycleRecord& rec, std::optional<double> wall_time) {
    if (rec.env_steps < last_env_steps_ || rec.updates < last_updates_) {
        throw UsageError("cycle record " + std::to_string(rec.cycle) + " moves env_steps or updates backwards");
    }
    last_env_steps_ = rec.env_steps;
    last_updates_ = rec.updates;
    write(cycle_record_json(rec, wall_time));
}

std::vector<json> RunLog::cycles() const {
    std::vector<json> out;
    for (const auto& r : records) {
        if (r.value("type", "") == "cycle") out.push_back(r);
    }
    return out;
}

std::vector<double> RunLog::cycle_series(const std::string& field) const {
    std::vector<double> out;
    for (const auto& r : records) {
        if (r.value("type", "") != "cycle") continue;
        const auto it = r.find(field);
        out.push_back(it == r.end() || !it->is_number() ? kNaN : it->get<double>());
    }
    return out;
}

RunLog parse_run_log(const std::string& text, const std::string& name) {
    RunLog log;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::string where = name + ":" + std::to_string(lineno);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(where + ": malformed record: " + e.what());
        }
        if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
            throw ParseError(where + ": record has no string 'type' field");
        }
        const std::string type = j["type"].get<std::string>();
        if (!have_header) {
            if (type != "header") throw ParseError(where + ": first record must be the header, got '" + type + "'");
            if (!j.contains("config")) throw ParseError(where + ": header lacks the config snapshot");
            log.header = std::move(j);
            have_header = true;
            continue;
        }
        if (type == "header") throw ParseError(where + ": second header record");
        if (type == "cycle") {
            for (const char* f : {"cycle", "env_steps", "updates", "m_used", "mean_return", "il_loss"}) {
                if (!j.contains(f)) throw ParseError(where + ": cycle record lacks '" + f + "'");
            }
            if (!j["env_steps"].is_number_integer() || !j["updates"].is_number_integer()) {
                throw ParseError(where + ": env_steps/updates must be integers");
            }
        }
        log.records.push_back(std::move(j));
    }
    if (!have_header) throw ParseError(name + ": empty log (no header)");
    return log;
}

RunLog read_run_log(const std::filesystem::path& path) { return parse_run_log(read_text_file(path), path.string()); }

// ------------------------------------------------------------ reductions

double max_relative_drop(const std::vector<double>& series) {
    if (series.empty()) return 0.0;
    const double first = series.front();
    double running_max = -std::numeric_limits<double>::infinity();
    double best = 0.0;
    for (double v : series) {
        if (!std::isfinite(v)) continue;
        running_max = std::max(running_max, v);
        if (running_max > first && running_max != 0.0) {
            best = std::max(best, (running_max - v) / std::abs(running_max));
        }
    }
    return best;
}

bool double_descent_flag(const std::vector<double>& series, double drop) {
    return max_relative_drop(series) >= drop;
}

double normalized_auc(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ShapeError("normalized_auc: x and y differ in length");
    if (x.empty()) return 0.0;
    if (x.size() == 1 || x.back() == x.front()) return y.front();
    double area = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) area += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    return area / (x.back() - x.front());
}

RunSummary summarize_log(const RunLog& log, const std::string& name) {
    RunSummary s;
    s.name = name;
    const json& cfg = log.header.at("config");
    s.mode = cfg.value("mode", "");
    s.seed = log.header.value("seed", std::uint64_t{0});
    const json& m = cfg.contains("m") ? cfg["m"] : json();
    if (s.mode == "rl_only") {
        s.m = "infinity";
    } else if (m.is_string()) {
        s.m = m.get<std::string>();
    } else {
        s.m = m.dump();
    }
    const auto cycles = log.cycles();
    s.cycles = cycles.size();
    for (const auto& r : log.records) {
        const std::string type = r.value("type", "");
        if (type == "divergence") s.status = "diverged";
        if (type == "error") s.status = "failed: " + r.value("message", "");
    }
    if (cycles.empty()) {
        if (s.status == "ok") s.status = "empty";
        s.final_return = kNaN;
        s.final_il_loss = kNaN;
        s.auc_return = kNaN;
        return s;
    }
    const std::vector<double> ret = log.cycle_series("mean_return");
    const std::vector<double> il = log.cycle_series("il_loss");
    const std::vector<double> steps = log.cycle_series("env_steps");
    s.env_steps = cycles.back()["env_steps"].get<std::int64_t>();
    s.final_return = ret.back();
    s.final_il_loss = il.back();
    s.auc_return = normalized_auc(steps, ret);
    s.max_il_drop = max_relative_drop(il);
    s.double_descent = double_descent_flag(il);
    const json& last = cycles.back();
    if (last.contains("eval_return") && last["eval_return"].is_number()) s.final_eval_return = last["eval_return"].get<double>();
    if (last.contains("eval_success") && last["eval_success"].is_number()) s.final_eval_success = last["eval_success"].get<double>();
    return s;
}

json to_json(const RunSummary& s) {
    json j;
    j["name"] = s.name;
    j["mode"] = s.mode;
    j["m"] = s.m;
    j["seed"] = s.seed;
    j["status"] = s.status;
    j["cycles"] = s.cycles;
    j["env_steps"] = s.env_steps;
    j["final_return"] = json_number(s.final_return);
    j["final_il_loss"] = json_number(s.final_il_loss);
    j["auc_return"] = json_number(s.auc_return);
    j["max_il_drop"] = json_number(s.max_il_drop);
    j["double_descent"] = s.double_descent;
    j["final_eval_return"] = s.final_eval_return ? json_number(*s.final_eval_return) : json(nullptr);
    j["final_eval_success"] = s.final_eval_success ? json_number(*s.final_eval_success) : json(nullptr);
    return j;
}

std::string summary_csv(const std::vector<RunSummary>& rows) {
    std::string out =
        "name,mode,m,seed,status,cycles,env_steps,final_return,final_il_loss,auc_return,max_il_drop,double_descent,"
        "final_eval_return,final_eval_success\n";
    for (const auto& s : rows) {
        std::string status = s.status;
        std::replace(status.begin(), status.end(), ',', ';');
        std::replace(status.begin(), status.end(), '\n', ' ');
        out += s.name + "," + s.mode + "," + s.m + "," + std::to_string(s.seed) + "," + status + "," +
               std::to_string(s.cycles) + "," + std::to_string(s.env_steps) + "," + csv_number(s.final_return) + "," +
               csv_number(s.final_il_loss) + "," + csv_number(s.auc_return) + "," + csv_number(s.max_il_drop) + "," +
               (s.double_descent ? "1" : "0") + "," + csv_optional(s.final_eval_return) + "," +
               csv_optional(s.final_eval_success) + "\n";
    }
    return out;
}

// ------------------------------------------------------------ smoothing

std::vector<double> savgol_filter(const std::vector<double>& y, int window, int order) {
    if (window < 1 || window % 2 == 0) throw ConfigError("Savitzky-Golay window must be a positive odd integer");
    if (order < 0 || order >= window) {
        if (window == 1 && order >= 0) return y;
        throw ConfigError("Savitzky-Golay polynomial order must satisfy 0 <= order < window");
    }
    if (window == 1) return y;
    const int n = static_cast<int>(y.size());
    if (n < window) throw ConfigError("Savitzky-Golay window (" + std::to_string(window) +
                                      ") is longer than the series (" + std::to_string(n) + ")");
    const int half = window / 2;
    // Vandermonde on offsets -half..half; row k of the pseudo-inverse gives the
    // k-th polynomial coefficient of the local fit.
    Eigen::MatrixXd V(window, order + 1);
    for (int i = 0; i < window; ++i) {
        const double t = i - half;
        double p = 1.0;
        for (int k = 0; k <= order; ++k) {
            V(i, k) = p;
            p *= t;
        }
    }
    const Eigen::MatrixXd pinv = V.completeOrthogonalDecomposition().pseudoInverse();
    std::vector<double> out(y.size());
    auto fit_at = [&](int start) {
        Eigen::VectorXd seg(window);
        for (int i = 0; i < window; ++i) seg(i) = y[static_cast<std::size_t>(start + i)];
        return Eigen::VectorXd(pinv * seg);
    };
    auto eval_poly = [&](const Eigen::VectorXd& c, double t) {
        double v = 0.0;
        for (int k = order; k >= 0; --k) v = v * t + c(k);
        return v;
    };
    const Eigen::RowVectorXd center = pinv.row(0);
    for (int i = half; i < n - half; ++i) {
        out[static_cast<std::size_t>(i)] = center.dot(Eigen::VectorXd::Map(&y[static_cast<std::size_t>(i - half)], window));
    }
    const Eigen::VectorXd head = fit_at(0);
    const Eigen::VectorXd tail = fit_at(n - window);
    for (int i = 0; i < half; ++i) {
        out[static_cast<std::size_t>(i)] = eval_poly(head, i - half);
        out[static_cast<std::size_t>(n - half + i)] = eval_poly(tail, i + 1);
    }
    return out;
}

// ------------------------------------------------------------ plotting

std::string render_svg(const std::vector<Curve>& curves, const std::string& title, const std::string& x_label,
                       const std::string& y_label) {
    constexpr double W = 720, H = 440, left = 70, right = 180, top = 40, bottom = 50;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < c.x.size() && i < c.y.size(); ++i) {
            if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i])) continue;
            xmin = std::min(xmin, c.x[i]);
            xmax = std::max(xmax, c.x[i]);
            ymin = std::min(ymin, c.y[i]);
            ymax = std::max(ymax, c.y[i]);
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pw = W - left - right, ph = H - top - bottom;
    auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    char buf[256];
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << xml_escape(title) << "</text>\n";
    s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + (xmax - xmin) * k / 4.0, yv = ymin + (ymax - ymin) * k / 4.0;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\" font-size=\"11\">%.4g</text>\n",
                      sx(xv), top + ph + 16, xv);
        s << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"end\" font-size=\"11\">%.4g</text>\n",
                      left - 6, sy(yv) + 4, yv);
        s << buf;
    }
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(x_label)
      << "</text>\n";
    s << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
    for (std::size_t ci = 0; ci < curves.size(); ++ci) {
        const auto& c = curves[ci];
        const char* color = colors[ci % 10];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < c.x.size() && i < c.y.size(); ++i) {
            if (!std::isfinite(c.x[i]) || !std::isfinite(c.y[i])) continue;
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", sx(c.x[i]), sy(c.y[i]));
            s << buf;
        }
        s << "\"/>\n";
        const double ly = top + 14 + 18.0 * static_cast<double>(ci);
        s << "<line x1=\"" << W - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 30 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << W - right + 36 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << xml_escape(c.label) << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

}  // namespace inril
