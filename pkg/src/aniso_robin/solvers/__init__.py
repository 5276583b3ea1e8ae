from .eigen import (EigenOptions, EigenResult, RadialResult, bessel_j0_first_root_squared, solve_lambda_p,
                    solve_radial_shooting)
from .setratio import (LambdaOptions, SetRatioResult, annulus_ratio, brute_force_ell, cheeger_constant,
                       divergence_demo, solve_Lambda)

__all__ = ["EigenOptions", "EigenResult", "RadialResult", "bessel_j0_first_root_squared", "solve_lambda_p",
           "solve_radial_shooting", "LambdaOptions", "SetRatioResult", "annulus_ratio", "brute_force_ell",
           "cheeger_constant", "divergence_demo", "solve_Lambda"]
