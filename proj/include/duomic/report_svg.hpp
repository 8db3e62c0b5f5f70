#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "duomic/metrics.hpp"
#include "duomic/trainer.hpp"

namespace duomic {

/// Static SVG plots backing the `report` subcommand.

std::string svg_curves(const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>& series,
                       const std::string& title, const std::string& x_label,
                       const std::string& y_label, bool diagonal_reference);

std::string svg_roc(const std::vector<std::pair<std::string, const RocCurve*>>& curves,
                    const std::string& title);

std::string svg_pr(const std::vector<std::pair<std::string, const PrCurve*>>& curves,
                   const std::string& title);

std::string svg_confusion(const ConfusionMatrix& cm, const std::vector<std::string>& classes,
                          const std::string& title);

std::string svg_bars(const std::vector<std::string>& labels, const std::vector<double>& values,
                     const std::string& title, double y_max = 1.0);

std::string svg_history(const TrainHistory& history, const std::string& title);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace duomic
