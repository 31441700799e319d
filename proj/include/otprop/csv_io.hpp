#pragma once

// CSV ingestion and output.
//   source: header x1,...,xd,label   (labels are 1-based integers)
//   target: header x1,...,xd
//   labels: header label

#include "otprop/measures.hpp"

#include <string>
#include <vector>

namespace otprop {

LabeledSample read_source_csv(const std::string& path);
DiscreteMeasure read_target_csv(const std::string& path);
std::vector<int> read_labels_csv(const std::string& path);

void write_source_csv(const std::string& path, const LabeledSample& sample);
void write_target_csv(const std::string& path, const RowMatrix& points);
void write_labels_csv(const std::string& path, const std::vector<int>& labels);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace otprop
