#pragma once

namespace groundgap::special {

// I_x(a, b) for a, b > 0 and x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

// P(|T| >= |t|) for Student's t with df degrees of freedom.
double student_t_two_sided_p(double t, double df);

// P(X >= x) for chi-square with one degree of freedom.
double chi_square_1df_survival(double x);

}  // namespace groundgap::special
