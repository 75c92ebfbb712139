#ifndef CGRPO_PLOT_HPP_
#define CGRPO_PLOT_HPP_

#include <filesystem>
#include <vector>

namespace cgrpo {

/// Renders SVG charts for a run directory into <run_dir>/plots:
///   sweep.svg       goal / lava / battery rate vs lambda_lava per mode,
///                   mean with std error bars over seeds (from eval.csv files)
///   curves_<p>.svg  per config point: task rates, behavior rates,
///                   multipliers and effective weights vs update (from
///                   metrics.csv files; seeds averaged, std band)
/// A directory holding a metrics.csv itself yields curves.svg. Output
/// depends only on the CSV contents. Throws MissingColumnsError naming
/// absent columns, std::runtime_error when nothing is plottable.
std::vector<std::filesystem::path> plot_run(const std::filesystem::path& run_dir);

}  // namespace cgrpo

#endif  // CGRPO_PLOT_HPP_
