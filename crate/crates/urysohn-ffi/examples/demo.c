#include "urysohn.h"
#include <stdio.h>
#include <math.h>

int main(void) {
    UryProblem *problem = NULL;
    UrySolution *solution = NULL;
    if (ury_problem_test2(1.0, &problem) != URY_STATUS_OK) return 1;
    UrySolveOptions options = {
        .n = 8,
        .method = URY_METHOD_HIGH_ORDER,
        .qip = URY_QIP_Q2,
        .seed = URY_SEED_PROJECT_RHS,
        .tol = 0.0,
        .max_iter = 0,
        .damped = false,
    };
    if (ury_solve(problem, &options, &solution) != URY_STATUS_OK) return 2;
    double value = 0.0;
    if (ury_solution_eval(solution, 0.5, &value) != URY_STATUS_OK) return 3;
    double expected = 1.0 / 1.5;
    if (fabs(value - expected) > 1e-8) return 4;
    double err = 0.0;
    if (ury_solution_max_error(solution, 500, &err) != URY_STATUS_OK) return 5;
    printf("phi(0.5) = %.12f (exact %.12f), max error %.3e, %u iterations, status '%s'\n",
           value, expected, err, ury_solution_iterations(solution),
           ury_status_name(URY_STATUS_OK));
    ury_solution_free(solution);
    ury_problem_free(problem);
    return 0;
}
