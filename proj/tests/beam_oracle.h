#pragma once

#include <algorithm>
#include <vector>

#include "segtrm/infer.h"

namespace segtrm::testing {

// Scores every complete sequence of length <= max_len (ending in [SEP], or
// reaching max_len) and returns them best first.
inline std::vector<Hypothesis> EnumerateAll(const NextLogProbFn& next, std::size_t max_len,
                                            LengthNorm norm) {
  std::vector<Hypothesis> complete;
  std::vector<Hypothesis> frontier(1);
  while (!frontier.empty()) {
    std::vector<Hypothesis> grown;
    for (const Hypothesis& h : frontier) {
      const std::vector<double> lp = next(h.ids);
      for (std::size_t id = 0; id < lp.size(); ++id) {
        if (!Generatable(static_cast<int>(id))) continue;
        Hypothesis c = h;
        c.ids.push_back(static_cast<int>(id));
        c.log_prob = h.log_prob + lp[id];
        if (c.ids.back() == kEndId || c.ids.size() == max_len) {
          c.finished = c.ids.back() == kEndId;
          c.score = HypothesisScore(c.ids, c.log_prob, norm);
          complete.push_back(c);
        } else {
          grown.push_back(c);
        }
      }
    }
    frontier = std::move(grown);
  }
  std::sort(complete.begin(), complete.end(), RanksBefore);
  return complete;
}

}  // namespace segtrm::testing
