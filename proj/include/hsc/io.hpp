#pragma once

#include "hsc/control.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace hsc {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);
double parse_double(const std::string& text);

/// Solution table: t, node_index, P, Lambda_1..n, v_hat_1..m; one row per node,
/// layers in time order. Reading restores P, Lambda and v_hat bit-for-bit.
void write_solution_csv(std::ostream& out, const BsdeSolution& sol);
BsdeSolution read_solution_csv(std::istream& in, Branch branch, double degree);

/// Feedback table: t, node_index, v_plus_1..m, v_minus_1..m.
void write_feedback_csv(std::ostream& out, const FeedbackControl& fb);
FeedbackControl read_feedback_csv(std::istream& in, const HomogeneousModel& model);

/// Kept trajectories: path_id, t, X, running_cost_so_far.
void write_batch_csv(std::ostream& out, const SimulationBatch& batch);

void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace hsc
