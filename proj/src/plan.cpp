#include "mba/plan.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace mba {

CalculationPlan::CalculationPlan(std::vector<PlanLine> lines) : lines_(std::move(lines)) { validate(); }

int CalculationPlan::max_input_index() const {
    int m = 0;
    for (const auto& l : lines_)
        if (l.source == PlanSource::Input) m = std::max(m, l.index);
    return m;
}

bool CalculationPlan::uses_input(int index) const {
    for (const auto& l : lines_)
        if (l.source == PlanSource::Input && l.index == index) return true;
    return false;
}

bool CalculationPlan::starts_with_unmasked_first_input() const {
    if (lines_.empty()) return false;
    const auto& l = lines_.front();
    return l.source == PlanSource::Input && l.index == 1 && l.mask.is_identity();
}

CalculationPlan CalculationPlan::appended(PlanLine line) const {
    auto lines = lines_;
    lines.push_back(std::move(line));
    return CalculationPlan(std::move(lines));
}

void CalculationPlan::validate() const {
    if (lines_.empty()) throw PlanError("calculation plan is empty");
    const int n_fields = lines_.front().mask.size();
    for (std::size_t l = 0; l < lines_.size(); ++l) {
        const auto& line = lines_[l];
        const auto pos = static_cast<std::ptrdiff_t>(l);
        if (line.index < 1) throw PlanError("index must be >= 1", pos);
        if (line.mask.size() != n_fields) throw PlanError("mask length differs from first line", pos);
        if (!line.mask.valid()) throw PlanError("mask entry out of range [0, n_fields]", pos);
        // The pile holds one column per executed line.
        if (line.source == PlanSource::Pile && line.index > static_cast<int>(l))
            throw PlanError("pile index " + std::to_string(line.index) + " not yet available", pos);
    }
}

CalculationPlan parse_plan(std::istream& in) {
    std::vector<PlanLine> lines;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        std::istringstream row(raw);
        std::string source;
        if (!(row >> source)) continue;
        PlanLine line;
        if (source == "I" || source == "i")
            line.source = PlanSource::Input;
        else if (source == "P" || source == "p")
            line.source = PlanSource::Pile;
        else
            throw PlanError("unknown source '" + source + "' in text line " + std::to_string(lineno));
        if (!(row >> line.index)) throw PlanError("missing index in text line " + std::to_string(lineno));
        std::vector<int> slots;
        for (int s; row >> s;) slots.push_back(s);
        if (!row.eof()) throw PlanError("non-integer mask entry in text line " + std::to_string(lineno));
        if (slots.empty()) throw PlanError("missing mask in text line " + std::to_string(lineno));
        line.mask = FieldMask(std::move(slots));
        lines.push_back(std::move(line));
    }
    return CalculationPlan(std::move(lines));
}

CalculationPlan parse_plan(const std::string& text) {
    std::istringstream in(text);
    return parse_plan(in);
}

CalculationPlan read_plan_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open plan file " + path);
    return parse_plan(in);
}

std::string format_plan(const CalculationPlan& plan) {
    std::ostringstream out;
    out << "# source index map\n";
    for (const auto& l : plan.lines()) {
        out << (l.source == PlanSource::Input ? 'I' : 'P') << ' ' << l.index;
        for (int s : l.mask.slots()) out << ' ' << s;
        out << '\n';
    }
    return out.str();
}

void write_plan_file(const CalculationPlan& plan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write plan file " + path);
    out << format_plan(plan);
}

CalculationPlan classical_arnoldi_plan(int n_lines, int n_fields) {
    if (n_lines < 1) throw PlanError("plan needs at least one line");
    std::vector<PlanLine> lines{{PlanSource::Input, 1, FieldMask::identity(n_fields)}};
    for (int l = 1; l < n_lines; ++l) lines.push_back({PlanSource::Pile, l, FieldMask::identity(n_fields)});
    return CalculationPlan(std::move(lines));
}

CalculationPlan published_plan(const std::string& case_id) {
    static const char* const b1 = "I 1 1\nP 1 1\n";
    static const char* const b2 = "I 1 1\nI 3 1\nP 2 1\nP 3 1\n";
    static const char* const b3 = "I 1 1\nI 3 1\nP 1 1\nP 3 1\nP 2 1\nP 5 1\nP 6 1\n";
    static const char* const e1 = "I 1 1 2 3\nP 1 0 2 0\nP 1 0 0 3\nP 1 0 0 1\n";
    static const char* const e2 = "I 1 1 2 3\nI 1 0 2 0\nP 1 0 0 1\nP 2 0 2 0\n";
    static const char* const e3 =
        "I 1 1 2 3\nP 1 0 2 0\nP 1 0 0 3\nP 1 0 1 0\nP 1 0 0 1\nI 1 0 0 3\n";
    static const char* const e4 =
        "I 1 1 2 3\nP 1 0 0 1\nP 1 0 2 0\nP 1 0 0 3\nP 2 0 2 0\n"
        "I 1 0 0 3\nP 3 0 2 0\nP 4 0 2 0\nP 5 0 2 0\nP 6 0 2 0\n";
    if (case_id == "B1") return parse_plan(b1);
    if (case_id == "B2") return parse_plan(b2);
    if (case_id == "B3") return parse_plan(b3);
    if (case_id == "E1") return parse_plan(e1);
    if (case_id == "E2") return parse_plan(e2);
    if (case_id == "E3") return parse_plan(e3);
    if (case_id == "E4" || case_id == "O1") return parse_plan(e4);
    throw ConfigError("no published plan for case " + case_id);
}

}  // namespace mba
