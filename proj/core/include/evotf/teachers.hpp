#pragma once

#include <cstdint>
#include <string>

#include "evotf/array.hpp"
#include "evotf/rng.hpp"

namespace evotf {

// Diagonal-Gaussian search state shared by all teachers.  `mu`/`sigma` fully
// describe the sampling distribution; everything else is algorithm-specific
// bookkeeping that the matching tell_* initializes lazily on first use.
struct EsState {
  Vec mu;
  Vec sigma;
  int generation{0};

  // Sep-CMA-ES
  Vec cma_diag;    // diagonal covariance entries c_d
  Vec cma_psigma;  // step-size path
  Vec cma_pc;      // covariance path
  float cma_step{0.0f};  // global step size; 0 means "not yet initialized"

  // OpenAI-ES
  Vec adam_m;
  Vec adam_v;
  int adam_t{0};

  // Hill climbing
  Vec best_x;
  float best_f{0.0f};
  bool has_best{false};
};

EsState make_es_state(Vec mu, Vec sigma);

enum class TeacherAlgo { Snes, SepCmaEs, OpenEs, HillClimb };
TeacherAlgo teacher_from_name(const std::string& name);  // ConfigError on bad name
const char* teacher_name(TeacherAlgo algo);

// x_i = mu + sigma ⊙ z_i, z_i i.i.d. standard normal.  Rows of the result are
// candidates.
Mat ask_gaussian(const EsState& state, Rng& rng, int N);
// Antithetic pairs: row 2k+1 mirrors row 2k through mu.  N must be even.
Mat ask_antithetic(const EsState& state, Rng& rng, int N);
// Dispatches on the algorithm's sampling convention.
Mat ask_teacher(TeacherAlgo algo, const EsState& state, Rng& rng, int N);

// Rank utilities u_i = max(0, ln(N/2+1) - ln(i)), normalized to sum 1 and
// shifted by -1/N; index 0 is the best rank, weights sum to 0.
Vec snes_utilities(int N);

// eta_sigma < 0 selects the dimension-based default (3+ln D)/(5 sqrt D).
EsState tell_snes(const EsState& state, const Mat& X, const Vec& F,
                  float eta_mu = 1.0f, float eta_sigma = -1.0f);
EsState tell_sepcmaes(const EsState& state, const Mat& X, const Vec& F);
EsState tell_openes(const EsState& state, const Mat& X, const Vec& F,
                    float lr = 0.05f);
EsState tell_hillclimb(const EsState& state, const Mat& X, const Vec& F,
                       float gamma = 0.999f);
EsState tell_teacher(TeacherAlgo algo, const EsState& state, const Mat& X,
                     const Vec& F);

}  // namespace evotf
