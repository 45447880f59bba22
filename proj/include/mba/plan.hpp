#pragma once

#include <compare>
#include <iosfwd>
#include <string>
#include <vector>

#include "mba/state.hpp"

namespace mba {

enum class PlanSource { Input = 0, Pile = 1 };

/// One step of a calculation plan: take vector `index` (1-based) from the
/// inputs or from the pile, mask it and feed it to the DAM update.
struct PlanLine {
    PlanSource source = PlanSource::Input;
    int index = 1;
    FieldMask mask;

    friend bool operator==(const PlanLine&, const PlanLine&) = default;
    friend auto operator<=>(const PlanLine&, const PlanLine&) = default;
};

class CalculationPlan {
  public:
    CalculationPlan() = default;
    explicit CalculationPlan(std::vector<PlanLine> lines);

    const std::vector<PlanLine>& lines() const noexcept { return lines_; }
    std::size_t size() const noexcept { return lines_.size(); }
    bool empty() const noexcept { return lines_.empty(); }
    const PlanLine& operator[](std::size_t i) const { return lines_[i]; }

    int n_fields() const { return lines_.empty() ? 0 : lines_.front().mask.size(); }
    /// Highest input index referenced (0 when no input line exists).
    int max_input_index() const;
    bool uses_input(int index) const;
    bool starts_with_unmasked_first_input() const;

    CalculationPlan appended(PlanLine line) const;

    /// Throws PlanError unless the plan is non-empty, masks agree in length and
    /// range, and every pile reference points at a column that will exist.
    void validate() const;

    friend bool operator==(const CalculationPlan&, const CalculationPlan&) = default;

  private:
    std::vector<PlanLine> lines_;
};

/// Text table, one line per plan line: `I 1 1 2 3` (source, index, mask slots).
/// `#` starts a comment; blank lines are ignored.
CalculationPlan parse_plan(std::istream& in);
CalculationPlan parse_plan(const std::string& text);
CalculationPlan read_plan_file(const std::string& path);
std::string format_plan(const CalculationPlan& plan);
void write_plan_file(const CalculationPlan& plan, const std::string& path);

/// Plan with `n_lines` lines seeded by input 1, each later line taking the
/// newest pile column: the classical Arnoldi iteration.
CalculationPlan classical_arnoldi_plan(int n_lines, int n_fields);

/// Trained plans as published for the Burgers (B1-B3) and Euler (E1-E4) cases.
CalculationPlan published_plan(const std::string& case_id);

}  // namespace mba
