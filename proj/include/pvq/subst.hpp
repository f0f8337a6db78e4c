#pragma once

/**
 * @file subst.hpp
 * @brief Substitution rules on the tiles of a quasilattice and their 0/1 matrix masks.
 *
 * A tile is an interval [p, p') between consecutive points. Inflating a tile
 * by lambda covers a run of consecutive tiles; the rule records that run for
 * each tile type. Types start as gap letters (exact length preimages) and are
 * refined by the types of their children until every type has a single
 * decomposition, the usual partition refinement for automata.
 */

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "pvq/qlat.hpp"

namespace pvq {

struct TileType {
  Preimage length;     // exact gap length c_j
  long double value;   // c_j as a real number
  int letter;          // index into SubstitutionRule::letters
  std::size_t occurrences;
};

struct Child {
  Preimage offset;  // from the left end of the inflated tile
  int type;
};

struct SubstitutionRule {
  ContextPtr context;
  std::vector<GapType> letters;                  // the gap alphabet D(sigma)
  std::vector<TileType> types;                   // types[0] is the tile [0, c_1)
  std::vector<std::vector<Child>> decomposition;
  std::size_t refinement_rounds = 0;
  /// A tile with endpoint 0 is the only tile of its type (singular window: the
  /// window boundary passes through an embedded lattice point).
  bool singular_origin = false;

  std::size_t size() const { return types.size(); }
  bool orientation_reversing() const { return context->lambda() < 0; }

  /// Left end of lambda [x, x + c_j): lambda x, or lambda (x + c_j) if lambda < 0.
  Preimage anchor(const Preimage& x, int type) const {
    if (!orientation_reversing()) return times_lambda(*context, x);
    return times_lambda(*context, add(x, types[static_cast<std::size_t>(type)].length));
  }

  /// Incidence matrix M(j, i) = number of children of type i in type j.
  Eigen::MatrixXd incidence() const {
    const auto m = static_cast<Eigen::Index>(types.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(m, m);
    for (std::size_t j = 0; j < decomposition.size(); ++j)
      for (const auto& c : decomposition[j]) M(static_cast<Eigen::Index>(j), c.type) += 1;
    return M;
  }
};

/// Spectral radius of a square matrix.
inline double spectral_radius(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  double r = 0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) r = std::max(r, std::abs(es.eigenvalues()[i]));
  return r;
}

/// Exact checks of the rule invariants. Returns an empty string when the rule
/// is valid, otherwise a description of the first failure.
inline std::string validate_rule(const SubstitutionRule& rule) {
  const auto& ctx = *rule.context;
  if (rule.decomposition.size() != rule.types.size()) return "decomposition count differs from type count";
  for (std::size_t j = 0; j < rule.types.size(); ++j) {
    const auto& dec = rule.decomposition[j];
    if (dec.empty()) return "type " + std::to_string(j) + " has no children";
    Preimage pos(static_cast<std::size_t>(ctx.degree()), 0);
    long double last = -1;
    for (const auto& c : dec) {
      if (c.type < 0 || static_cast<std::size_t>(c.type) >= rule.types.size()) return "child type out of range";
      if (c.offset != pos) return "children of type " + std::to_string(j) + " do not abut";
      long double v = embed_preimage(ctx, c.offset)[0].real();
      if (v <= last) return "offsets of type " + std::to_string(j) + " are not increasing";
      last = v;
      pos = add(pos, rule.types[static_cast<std::size_t>(c.type)].length);
    }
    Preimage inflated = times_lambda(ctx, rule.types[j].length);
    if (rule.orientation_reversing())
      for (auto& v : inflated) v = -v;
    if (pos != inflated) return "length equation fails for type " + std::to_string(j);
  }
  return {};
}

struct DeriveOptions {
  double margin = 5.0;            // interior margin for the alphabet comparison
  std::size_t max_types = 64;
  std::size_t max_rounds = 32;
  std::size_t min_occurrences = 3;
  bool refine_types = true;       // false: tile types are the gap letters themselves
  GenerateOptions generate;
};

/// Derives the substitution rule of L(sigma) from a probe window [-L, L].
///
/// The gap alphabet is compared between L and 2L. Tiles of the 2L set whose
/// inflation stays inside the generated range get their children read off by
/// exact preimage lookup of the inflated endpoints. Types are refined until
/// every type reachable from the origin tile decomposes the same way at all
/// of its occurrences.
inline SubstitutionRule derive_rule(const ContextPtr& ctx, const Window& w, double L_probe,
                                    const DeriveOptions& opt = {}) {
  if (!ctx->unit_constant()) throw Error(ErrorCode::NotUnitConstant, "substitution needs |c_0| = 1");
  if (ctx->classification() != Classification::PV) throw Error(ErrorCode::NotPV, "substitution needs a PV number");

  auto q1 = generate(ctx, w, L_probe, opt.generate);
  auto q = generate(ctx, w, 2 * L_probe, opt.generate);
  auto letters = gap_alphabet(q1, opt.margin);
  {
    auto doubled = gap_alphabet(q, opt.margin);
    std::set<Preimage> a, b;
    for (const auto& g : letters) a.insert(g.preimage);
    for (const auto& g : doubled) b.insert(g.preimage);
    if (a != b)
      throw Error(ErrorCode::AlphabetUnstable, "gap alphabet has " + std::to_string(a.size()) + " letters at L and " +
                                                   std::to_string(b.size()) + " at 2L");
  }
  std::map<Preimage, int> letter_of;
  for (std::size_t i = 0; i < letters.size(); ++i) letter_of[letters[i].preimage] = static_cast<int>(i);

  const auto& pts = q.points();
  const std::size_t tiles = pts.size() - 1;
  const bool reverse = ctx->lambda() < 0;

  // kids[k] = index range of tiles covering lambda * tile k, or empty
  std::vector<std::pair<std::size_t, std::size_t>> kids(tiles, {0, 0});
  std::vector<bool> has_kids(tiles, false);
  for (std::size_t k = 0; k < tiles; ++k) {
    auto a = q.find(times_lambda(*ctx, pts[k].preimage));
    auto b = q.find(times_lambda(*ctx, pts[k + 1].preimage));
    if (!a || !b) continue;
    if (reverse) std::swap(a, b);
    kids[k] = {*a, *b};
    has_kids[k] = true;
  }

  // Labels over the current domain (-1 = undefined).
  std::vector<int> label(tiles, -1);
  for (std::size_t k = 0; k < tiles; ++k) {
    auto it = letter_of.find(sub(pts[k + 1].preimage, pts[k].preimage));
    if (it != letter_of.end()) label[k] = it->second;
  }
  const std::size_t origin = q.lower_bound(0);
  if (origin >= tiles) throw Error(ErrorCode::TooFewPoints, "no tile at the origin");

  auto children_defined = [&](std::size_t k) {
    if (!has_kids[k] || label[k] < 0) return false;
    for (std::size_t c = kids[k].first; c < kids[k].second; ++c)
      if (label[c] < 0) return false;
    return true;
  };

  for (std::size_t round = 0;; ++round) {
    // Decompositions (as child label sequences) seen for each label.
    std::map<int, std::map<std::vector<int>, std::size_t>> seen;
    for (std::size_t k = 0; k < tiles; ++k) {
      if (!children_defined(k)) continue;
      std::vector<int> seq;
      for (std::size_t c = kids[k].first; c < kids[k].second; ++c) seq.push_back(label[c]);
      ++seen[label[k]][seq];
    }
    // Types reachable from the origin tile, and whether each is consistent.
    if (label[origin] < 0) throw Error(ErrorCode::OccurrenceInconsistent, "origin tile lost during refinement");
    std::vector<int> order{label[origin]};
    std::set<int> reached{label[origin]};
    bool consistent = true;
    std::string why;
    for (std::size_t i = 0; i < order.size() && consistent; ++i) {
      auto it = seen.find(order[i]);
      if (it == seen.end()) {
        consistent = false;
        why = "a tile type has no occurrence with known children";
        break;
      }
      if (it->second.size() != 1) {
        consistent = false;
        why = "a tile type decomposes in " + std::to_string(it->second.size()) + " different ways";
        break;
      }
      for (int c : it->second.begin()->first)
        if (reached.insert(c).second) order.push_back(c);
    }
    if (consistent) {
      // Tiles touching 0 may form a pattern that never recurs (singular window);
      // a type whose only occurrence is such a tile is accepted as it is.
      std::set<int> at_zero;
      if (origin > 0 && label[origin - 1] >= 0) at_zero.insert(label[origin - 1]);
      at_zero.insert(label[origin]);
      bool singular = false;
      for (int t : order) {
        std::size_t occ = seen[t].begin()->second;
        if (occ == 1 && at_zero.count(t)) {
          singular = true;
          continue;
        }
        if (occ < opt.min_occurrences)
          throw Error(ErrorCode::TooFewOccurrences, "a tile type occurs only " + std::to_string(occ) +
                                                         " times with known children; increase L_probe");
      }
      std::map<int, int> index;
      for (std::size_t i = 0; i < order.size(); ++i) index[order[i]] = static_cast<int>(i);
      SubstitutionRule rule{ctx, letters, {}, {}, round, singular};
      // one representative tile per type
      std::map<int, std::size_t> rep;
      for (std::size_t k = 0; k < tiles; ++k)
        if (children_defined(k) && index.count(label[k]) && !rep.count(label[k])) rep[label[k]] = k;
      rep[label[origin]] = origin;
      for (int t : order) {
        const std::size_t k = rep[t];
        Preimage len = sub(pts[k + 1].preimage, pts[k].preimage);
        rule.types.push_back({len, embed_preimage(*ctx, len)[0].real(), letter_of.at(len), seen[t].begin()->second});
      }
      for (int t : order) {
        const std::size_t k = rep[t];
        const Preimage left = reverse ? times_lambda(*ctx, pts[k + 1].preimage) : times_lambda(*ctx, pts[k].preimage);
        std::vector<Child> dec;
        for (std::size_t c = kids[k].first; c < kids[k].second; ++c)
          dec.push_back({sub(pts[c].preimage, left), index.at(label[c])});
        rule.decomposition.push_back(std::move(dec));
      }
      if (auto err = validate_rule(rule); !err.empty()) throw Error(ErrorCode::OccurrenceInconsistent, err);
      return rule;
    }
    if (!opt.refine_types) throw Error(ErrorCode::OccurrenceInconsistent, why);
    if (round >= opt.max_rounds)
      throw Error(ErrorCode::OccurrenceInconsistent, why + " after " + std::to_string(round) + " refinement rounds");

    // Refine: new label = (old label, children's old labels).
    std::map<std::vector<int>, int> ids;
    std::vector<int> next(tiles, -1);
    for (std::size_t k = 0; k < tiles; ++k) {
      if (!children_defined(k)) continue;
      std::vector<int> key{label[k]};
      for (std::size_t c = kids[k].first; c < kids[k].second; ++c) key.push_back(label[c]);
      next[k] = ids.emplace(key, static_cast<int>(ids.size())).first->second;
    }
    if (ids.size() > opt.max_types)
      throw Error(ErrorCode::OccurrenceInconsistent,
                  why + "; refinement exceeded " + std::to_string(opt.max_types) + " tile types");
    label = std::move(next);
  }
}

struct ExpandedPoint {
  Preimage preimage;
  long double value;
  int type;
};

/// Left endpoints of the tiles of lambda^k [0, c_1), from k substitution steps.
inline std::vector<ExpandedPoint> expand(const SubstitutionRule& rule, int k, std::size_t budget = 10'000'000) {
  if (k < 0) throw Error(ErrorCode::BadConfig, "expansion depth must be non-negative");
  const auto& ctx = *rule.context;
  std::vector<std::pair<Preimage, int>> tiles{{Preimage(static_cast<std::size_t>(ctx.degree()), 0), 0}};
  for (int step = 0; step < k; ++step) {
    std::size_t count = 0;
    for (const auto& t : tiles) count += rule.decomposition[static_cast<std::size_t>(t.second)].size();
    if (count > budget) throw Error(ErrorCode::Overflow, "expansion exceeds " + std::to_string(budget) + " tiles");
    std::vector<std::pair<Preimage, int>> next;
    next.reserve(count);
    for (const auto& [x, type] : tiles) {
      Preimage left = rule.anchor(x, type);
      for (const auto& c : rule.decomposition[static_cast<std::size_t>(type)]) next.emplace_back(add(left, c.offset), c.type);
    }
    tiles = std::move(next);
  }
  std::vector<ExpandedPoint> out;
  out.reserve(tiles.size());
  for (auto& [x, type] : tiles) {
    long double v = embed_preimage(ctx, x)[0].real();
    out.push_back({std::move(x), v, type});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
  return out;
}

struct MaskMatrix {
  Preimage offset;
  long double value;
  Eigen::MatrixXi a;  // a(j, i) = 1 iff (offset, i) is a child of type j
};

/// The 0/1 matrices of the vector refinement equation, one per distinct offset.
inline std::vector<MaskMatrix> vector_mask(const SubstitutionRule& rule) {
  const auto m = static_cast<Eigen::Index>(rule.size());
  std::map<Preimage, std::size_t> slot;
  std::vector<MaskMatrix> out;
  for (std::size_t j = 0; j < rule.decomposition.size(); ++j) {
    for (const auto& c : rule.decomposition[j]) {
      auto it = slot.find(c.offset);
      if (it == slot.end()) {
        it = slot.emplace(c.offset, out.size()).first;
        out.push_back({c.offset, embed_preimage(*rule.context, c.offset)[0].real(), Eigen::MatrixXi::Zero(m, m)});
      }
      out[it->second].a(static_cast<Eigen::Index>(j), c.type) = 1;
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
  return out;
}

/// chi_{[0, c_j)}(x) for every type j.
inline std::vector<int> tile_indicators(const SubstitutionRule& rule, long double x) {
  std::vector<int> out;
  for (const auto& t : rule.types) out.push_back(x >= 0 && x < t.value ? 1 : 0);
  return out;
}

/// Right side of chi_{I_j}(x) = sum_tau sum_i a_tau(j, i) chi_{I_i}(lambda x - s_j - tau),
/// where s_j = 0 for lambda > 0 and s_j = lambda c_j otherwise.
inline std::vector<int> reconstruct_indicators(const SubstitutionRule& rule, const std::vector<MaskMatrix>& mask,
                                               long double x) {
  const long double lam = rule.context->lambda();
  std::vector<int> out(rule.size(), 0);
  for (std::size_t j = 0; j < rule.size(); ++j) {
    const long double shift = rule.orientation_reversing() ? lam * rule.types[j].value : 0;
    for (const auto& mm : mask) {
      auto inner = tile_indicators(rule, lam * x - shift - mm.value);
      for (std::size_t i = 0; i < rule.size(); ++i)
        out[j] += mm.a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * inner[i];
    }
  }
  return out;
}

}  // namespace pvq
