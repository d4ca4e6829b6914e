#pragma once

#include <string>
#include <vector>

#include "binscatter/dataset.hpp"
#include "binscatter/inference.hpp"

namespace binscatter {

/// Reads a header-prefixed CSV. Rows with a missing or non-numeric value in
/// any used column are dropped and counted. Group labels are kept as text.
/// Throws FileError, SchemaError, EmptyData.
Dataset load_csv(const std::string& path, const std::string& y_col, const std::string& x_col,
                 const std::vector<std::string>& w_cols = {}, const std::string& group_col = "");

/// Splits one CSV record, honoring double quotes.
std::vector<std::string> split_csv_line(const std::string& line);

/// Binscatter dots: within-bin mean of x and the fitted level there.
struct Dots {
  std::vector<double> x;
  std::vector<double> y;
};

Dots binscatter_dots(const Dataset& data, const FitResult& point);

/// SVG with dots, the band polygon and the center line. The root element
/// records the data-to-pixel map in data-* attributes.
std::string render_svg(const Dots& dots, const BandResult* band, const std::string& title = "");

}  // namespace binscatter
