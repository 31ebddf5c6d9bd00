#pragma once

#include <string>
#include <vector>

#include "gio/mdp.hpp"

namespace gio::io {

/// MDP file format: JSON object with n_states, n_actions, gamma,
/// reward_atoms, transition, reward_dist, initial_dist. Loading enforces
/// validate() and rejects files with any violation.
std::string mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const std::string& text);
void save_mdp(const TabularMdp& mdp, const std::string& path);
TabularMdp load_mdp(const std::string& path);

std::string policy_to_json(const PolicyTable& pi);
PolicyTable policy_from_json(const std::string& text);
void save_policy(const PolicyTable& pi, const std::string& path);
PolicyTable load_policy(const std::string& path);

std::string q_to_json(const QTable& q);
void save_q(const QTable& q, const std::string& path);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// CSV with a fixed "%.17g" float format so reruns are byte-identical.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void add_row(const std::vector<double>& values);
    const std::string& text() const { return text_; }
    void save(const std::string& path) const;

private:
    std::string text_;
    std::size_t columns_;
};

/// Minimal self-contained SVG line chart (one polyline per series).
std::string svg_line_chart(const std::vector<std::string>& labels,
                           const std::vector<std::vector<double>>& series,
                           const std::string& title, int width = 720,
                           int height = 420);

/// FNV-1a over a canonical JSON dump; stable under key reordering.
std::string config_hash(const std::string& canonical_json);

}  // namespace gio::io
