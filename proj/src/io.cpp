#include "gio/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace gio::io {

using nlohmann::json;

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

std::string mdp_to_json(const TabularMdp& mdp) {
    json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    j["gamma"] = mdp.gamma;
    j["reward_atoms"] = mdp.reward_atoms;
    j["transition"] = mdp.transition;
    j["reward_dist"] = mdp.reward_dist;
    j["initial_dist"] = mdp.initial_dist;
    return j.dump(2);
}

TabularMdp mdp_from_json(const std::string& text) {
    const json j = json::parse(text);
    TabularMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.reward_atoms = j.at("reward_atoms").get<std::vector<double>>();
    mdp.transition = j.at("transition").get<Table3>();
    mdp.reward_dist = j.at("reward_dist").get<Table3>();
    mdp.initial_dist = j.at("initial_dist").get<std::vector<double>>();
    require_valid(mdp);
    return mdp;
}

void save_mdp(const TabularMdp& mdp, const std::string& path) {
    write_text_file(path, mdp_to_json(mdp));
}

TabularMdp load_mdp(const std::string& path) {
    return mdp_from_json(read_text_file(path));
}

std::string policy_to_json(const PolicyTable& pi) {
    json j;
    j["n_states"] = pi.n_states();
    j["n_actions"] = pi.n_actions();
    j["probs"] = pi.probs;
    return j.dump(2);
}

PolicyTable policy_from_json(const std::string& text) {
    const json j = json::parse(text);
    PolicyTable pi;
    pi.probs = j.at("probs").get<Table2>();
    if (!pi.rows_normalized(1e-9))
        throw std::invalid_argument("policy file: rows not normalized");
    return pi;
}

void save_policy(const PolicyTable& pi, const std::string& path) {
    write_text_file(path, policy_to_json(pi));
}

PolicyTable load_policy(const std::string& path) {
    return policy_from_json(read_text_file(path));
}

std::string q_to_json(const QTable& q) {
    json j;
    j["n_states"] = q.q.size();
    j["n_actions"] = q.q.empty() ? 0 : q.q[0].size();
    j["q"] = q.q;
    return j.dump(2);
}

void save_q(const QTable& q, const std::string& path) {
    write_text_file(path, q_to_json(q));
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) text_ += ',';
        text_ += header[i];
    }
    text_ += '\n';
}

void CsvWriter::add_row(const std::vector<double>& values) {
    if (values.size() != columns_)
        throw std::invalid_argument("CsvWriter: wrong column count");
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) text_ += ',';
        text_ += fmt_double(values[i]);
    }
    text_ += '\n';
}

void CsvWriter::save(const std::string& path) const { write_text_file(path, text_); }

std::string svg_line_chart(const std::vector<std::string>& labels,
                           const std::vector<std::vector<double>>& series,
                           const std::string& title, int width, int height) {
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                    "#9467bd", "#ff7f0e", "#8c564b"};
    const int margin = 46;
    double lo = 0.0, hi = 1.0;
    std::size_t n = 0;
    bool first = true;
    for (const auto& s : series)
        for (double y : s) {
            if (!std::isfinite(y)) continue;
            if (first) {
                lo = hi = y;
                first = false;
            } else {
                lo = std::min(lo, y);
                hi = std::max(hi, y);
            }
        }
    for (const auto& s : series) n = std::max(n, s.size());
    if (hi - lo < 1e-12) hi = lo + 1.0;

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
        << height << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << width / 2 << "' y='20' text-anchor='middle' "
        << "font-family='sans-serif' font-size='14'>" << title << "</text>\n";
    svg << "<line x1='" << margin << "' y1='" << height - margin << "' x2='"
        << width - margin << "' y2='" << height - margin
        << "' stroke='black' stroke-width='1'/>\n";
    svg << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
        << height - margin << "' stroke='black' stroke-width='1'/>\n";
    svg << "<text x='" << margin - 6 << "' y='" << margin + 4
        << "' text-anchor='end' font-family='sans-serif' font-size='10'>"
        << fmt_double(hi) << "</text>\n";
    svg << "<text x='" << margin - 6 << "' y='" << height - margin + 4
        << "' text-anchor='end' font-family='sans-serif' font-size='10'>"
        << fmt_double(lo) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        if (s.empty()) continue;
        svg << "<polyline fill='none' stroke='" << kColors[k % 6]
            << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double fx = n <= 1 ? 0.0 : static_cast<double>(i) / (n - 1);
            const double fy = (s[i] - lo) / (hi - lo);
            const double x = margin + fx * (width - 2 * margin);
            const double y = height - margin - fy * (height - 2 * margin);
            svg << x << ',' << y << ' ';
        }
        svg << "'/>\n";
        if (k < labels.size())
            svg << "<text x='" << width - margin + 4 << "' y='" << margin + 14 * (k + 1)
                << "' font-family='sans-serif' font-size='10' fill='" << kColors[k % 6]
                << "'>" << labels[k] << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string config_hash(const std::string& canonical_json) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_json) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace gio::io
