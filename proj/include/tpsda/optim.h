// include/tpsda/optim.h

// Copyright 2026  The tpsda authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TPSDA_OPTIM_H_
#define TPSDA_OPTIM_H_

#include <functional>

namespace tpsda {

/// Brent's derivative-free local minimizer (golden section with parabolic
/// interpolation) on [a, b].  Returns the abscissa of the minimum located
/// to absolute tolerance tol; f is evaluated ~1-2 times per iteration.
double BrentMinimize(double a, double b,
                     const std::function<double(double)> &f, double tol,
                     int max_iter = 200);

}  // namespace tpsda

#endif  // TPSDA_OPTIM_H_
