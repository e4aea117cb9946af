#ifndef BLENDSA_FORMULA_HPP
#define BLENDSA_FORMULA_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "blendsa/table.hpp"

namespace blendsa {

// A model formula restricted to main effects and two-way interactions.
// Categorical terms expand to reference-cell dummies against the column's
// declared baseline level.
struct Term {
  std::string first;
  std::string second;  // empty for a main effect
  bool is_interaction() const { return !second.empty(); }
};

struct Formula {
  std::string response;  // may be empty
  std::vector<Term> terms;
  bool intercept = true;

  // Every column name referenced by the terms (response excluded).
  std::vector<std::string> term_columns() const;
};

// Parses "[response ~] t1 + t2 + a:b". "1" is the intercept (default on);
// "0" or "-1" removes it. No nesting, transforms, or higher-order terms.
Formula parse_formula(const std::string& text);

struct DesignMatrix {
  Eigen::MatrixXd X;
  std::vector<std::string> column_names;
};

// Builds the dense design matrix for `rows`, reading through the view's
// overlay. Throws MissingValueError naming subject and column when a
// required cell is neither observed nor imputed.
DesignMatrix design_matrix(const DataView& view, const Formula& formula,
                           const std::vector<std::size_t>& rows);

// Response vector for the formula's response column over `rows`.
Eigen::VectorXd response_vector(const DataView& view, const Formula& formula,
                                const std::vector<std::size_t>& rows);

}  // namespace blendsa

#endif
