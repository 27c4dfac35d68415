#include "trimlab/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>

#include "trimlab/errors.hpp"
#include "trimlab/parallel.hpp"

namespace trimlab {

EventFamily EventFamily::validated(std::vector<double> thresholds, int depth,
                                   std::uint64_t min_count) {
  if (thresholds.empty()) throw config_error("event family needs at least one threshold");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!std::isfinite(thresholds[i]) || !(thresholds[i] > 0.0))
      throw config_error("thresholds must be finite and > 0");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw config_error("thresholds must be strictly increasing");
  }
  if (depth != 1 && depth != 2) throw config_error("event depth must be 1 or 2");
  if (min_count < 20) throw config_error("min_count below 20 makes the ratio too noisy");
  return EventFamily{std::move(thresholds), depth, min_count};
}

double psi_measure(std::uint64_t joint, std::uint64_t b_count, std::uint64_t c_count,
                   std::uint64_t total) {
  if (b_count < 1 || c_count < 1) throw config_error("psi needs both events to occur");
  if (total < 1) throw config_error("psi needs a positive sample count");
  const double ratio = static_cast<double>(joint) * static_cast<double>(total) /
                       (static_cast<double>(b_count) * static_cast<double>(c_count));
  return std::fabs(ratio - 1.0);
}

namespace {

struct EventDef {
  double a = 0.0;      // threshold at the event's own coordinate
  double a_nbr = 0.0;  // threshold at the neighbor coordinate (depth 2 only)
  bool has_nbr = false;
};

std::vector<EventDef> make_events(const EventFamily& fam) {
  std::vector<EventDef> ev;
  for (double a : fam.thresholds) ev.push_back({a, 0.0, false});
  if (fam.depth == 2) {
    for (double a : fam.thresholds)
      for (double an : fam.thresholds) ev.push_back({a, an, true});
  }
  return ev;
}

std::string describe(const EventDef& e, const char* coord, const char* nbr) {
  char buf[96];
  if (e.has_nbr)
    std::snprintf(buf, sizeof buf, "X[%s]>%g & X[%s]>%g", coord, e.a, nbr, e.a_nbr);
  else
    std::snprintf(buf, sizeof buf, "X[%s]>%g", coord, e.a);
  return buf;
}

struct Counts {
  std::vector<std::uint64_t> b, c, joint;  // joint is nb x nc row-major
  explicit Counts(std::size_t nb, std::size_t nc) : b(nb, 0), c(nc, 0), joint(nb * nc, 0) {}
  void merge(const Counts& o) {
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += o.b[i];
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += o.c[i];
    for (std::size_t i = 0; i < joint.size(); ++i) joint[i] += o.joint[i];
  }
};

// values is 1-based via values[k-1]; B anchored at k_anchor with neighbor
// k_anchor-1, C at k_anchor+lag with neighbor one past it.
void tally(const std::vector<double>& values, const std::vector<EventDef>& evs,
           std::uint64_t k_anchor, std::uint64_t lag, Counts& out) {
  const std::size_t nb = evs.size();
  std::vector<char> hitb(nb), hitc(nb);
  const double xb = values[k_anchor - 1];
  const double xb_nbr = k_anchor >= 2 ? values[k_anchor - 2] : 0.0;
  const double xc = values[k_anchor + lag - 1];
  // the slot past the lagged coordinate exists only for depth-2 families
  const double xc_nbr = values.size() > k_anchor + lag ? values[k_anchor + lag] : 0.0;
  for (std::size_t i = 0; i < nb; ++i) {
    const auto& e = evs[i];
    hitb[i] = xb > e.a && (!e.has_nbr || xb_nbr > e.a_nbr);
    hitc[i] = xc > e.a && (!e.has_nbr || xc_nbr > e.a_nbr);
  }
  for (std::size_t i = 0; i < nb; ++i) {
    if (hitb[i]) ++out.b[i];
    if (hitc[i]) ++out.c[i];
  }
  for (std::size_t i = 0; i < nb; ++i) {
    if (!hitb[i]) continue;
    for (std::size_t j = 0; j < nb; ++j)
      if (hitc[j]) ++out.joint[i * nb + j];
  }
}

PsiEstimate pick_best(const Counts& cnt, const std::vector<EventDef>& evs,
                      const EventFamily& fam, std::uint64_t lag, std::uint64_t total) {
  const std::size_t nb = evs.size();
  bool any = false;
  PsiEstimate best;
  best.lag = lag;
  best.total = total;
  for (std::size_t i = 0; i < nb; ++i) {
    if (cnt.b[i] < fam.min_count) continue;
    for (std::size_t j = 0; j < nb; ++j) {
      if (cnt.c[j] < fam.min_count) continue;
      const double psi = psi_measure(cnt.joint[i * nb + j], cnt.b[i], cnt.c[j], total);
      if (!any || psi > best.value) {
        any = true;
        best.value = psi;
        best.b_desc = describe(evs[i], "k", "k-1");
        best.c_desc = describe(evs[j], "k+lag", "k+lag+1");
        best.joint = cnt.joint[i * nb + j];
        best.b_count = cnt.b[i];
        best.c_count = cnt.c[j];
      }
    }
  }
  if (!any)
    throw insufficient_data_error(
        "every event pair fell below min_count; lower the thresholds or add replicas");
  return best;
}

void check_args(const EventFamily& fam, std::uint64_t lag, std::uint64_t k_anchor) {
  if (lag < 1) throw config_error("lag must be >= 1");
  if (k_anchor < static_cast<std::uint64_t>(fam.depth))
    throw config_error("k_anchor must be >= depth so the neighbor coordinate exists");
}

}  // namespace

PsiEstimate estimate_psi(const ProcessSpec& spec, const EventFamily& family, std::uint64_t lag,
                         std::uint64_t k_anchor, std::uint64_t replicas,
                         std::uint64_t master_seed, int workers) {
  check_args(family, lag, k_anchor);
  if (replicas < 1) throw config_error("need at least one replica");
  const auto evs = make_events(family);
  const std::uint64_t len = k_anchor + lag + static_cast<std::uint64_t>(family.depth) - 1;
  Counts cnt(evs.size(), evs.size());
  const int nthreads = effective_workers(workers);
  std::exception_ptr first_error = nullptr;

#pragma omp parallel num_threads(nthreads)
  {
    Counts local(evs.size(), evs.size());
    std::vector<double> values(len);
#pragma omp for schedule(static)
    for (std::int64_t r = 0; r < static_cast<std::int64_t>(replicas); ++r) {
      try {
        auto gen = make_generator(spec, replica_rng(master_seed, static_cast<std::uint64_t>(r)));
        for (std::uint64_t i = 0; i < len; ++i) values[i] = gen->next();
        tally(values, evs, k_anchor, lag, local);
      } catch (...) {
#pragma omp critical(trimlab_mixing_err)
        if (!first_error) first_error = std::current_exception();
      }
    }
#pragma omp critical(trimlab_mixing_merge)
    cnt.merge(local);
  }
  if (first_error) std::rethrow_exception(first_error);
  return pick_best(cnt, evs, family, lag, replicas);
}

PsiEstimate estimate_psi(std::span<const SamplePath> paths, const EventFamily& family,
                         std::uint64_t lag, std::uint64_t k_anchor) {
  check_args(family, lag, k_anchor);
  if (paths.empty()) throw config_error("need at least one path");
  const auto evs = make_events(family);
  const std::uint64_t len = k_anchor + lag + static_cast<std::uint64_t>(family.depth) - 1;
  Counts cnt(evs.size(), evs.size());
  for (const auto& p : paths) {
    if (p.values.size() < len)
      throw config_error("path too short for this lag and anchor");
    tally(p.values, evs, k_anchor, lag, cnt);
  }
  return pick_best(cnt, evs, family, lag, paths.size());
}

std::vector<PsiEstimate> psi_scan(const ProcessSpec& spec, const EventFamily& family,
                                  const std::vector<std::uint64_t>& lags, std::uint64_t k_anchor,
                                  std::uint64_t replicas, std::uint64_t master_seed, int workers) {
  if (lags.empty()) throw config_error("need at least one lag");
  std::vector<PsiEstimate> out;
  out.reserve(lags.size());
  for (std::uint64_t lag : lags)
    out.push_back(estimate_psi(spec, family, lag, k_anchor, replicas, master_seed, workers));
  return out;
}

std::optional<std::uint64_t> min_mixing_lag(std::span<const PsiEstimate> by_lag,
                                            double threshold) {
  std::vector<const PsiEstimate*> sorted;
  for (const auto& e : by_lag) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const PsiEstimate* a, const PsiEstimate* b) { return a->lag < b->lag; });
  for (const auto* e : sorted)
    if (e->value < threshold) return e->lag;
  return std::nullopt;
}

}  // namespace trimlab
