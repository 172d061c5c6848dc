#include "tcnn/linking.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace tcnn {

double overlap(const TubeProposal& a, const TubeProposal& b) {
  if (b.clip_index != a.clip_index + 1)
    throw std::invalid_argument("overlap: clips " + std::to_string(a.clip_index) + " and " +
                                std::to_string(b.clip_index) + " are not adjacent");
  if (a.boxes.empty() || b.boxes.empty()) throw std::invalid_argument("overlap: empty tube");
  return iou(a.boxes.back(), b.boxes.front());
}

namespace {

double finish(double sum_a, double sum_o, std::size_t m) {
  return sum_a / static_cast<double>(m) + (m > 1 ? sum_o / static_cast<double>(m - 1) : 0.0);
}

void check_clips(const std::vector<std::vector<TubeProposal>>& per_clip, const char* who) {
  if (per_clip.empty()) throw std::invalid_argument(std::string(who) + ": no clips");
  for (std::size_t i = 0; i < per_clip.size(); ++i)
    if (per_clip[i].empty())
      throw std::invalid_argument(std::string(who) + ": clip " + std::to_string(i) +
                                  " has no proposals");
}

LinkedSequence make_sequence(const std::vector<std::vector<TubeProposal>>& per_clip,
                             std::vector<int> choice, double score) {
  LinkedSequence s;
  for (std::size_t i = 0; i < choice.size(); ++i) s.proposals.push_back(per_clip[i][choice[i]]);
  s.choice = std::move(choice);
  s.score = score;
  return s;
}

bool better(double sa, const std::vector<int>& ia, double sb, const std::vector<int>& ib) {
  if (sa != sb) return sa > sb;
  return ia < ib;
}

}  // namespace

double score_sequence(const std::vector<TubeProposal>& seq) {
  if (seq.empty()) throw std::invalid_argument("score_sequence: empty sequence");
  double sa = 0.0, so = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    sa += seq[i].actionness;
    if (i > 0) so += overlap(seq[i - 1], seq[i]);
  }
  return finish(sa, so, seq.size());
}

namespace {

// Partial chain ending at some proposal of the current clip.
struct Partial {
  double sum_a = 0.0;
  double sum_o = 0.0;
  std::vector<int> idx;
};

}  // namespace

std::vector<LinkedSequence> link_top_k(const std::vector<std::vector<TubeProposal>>& per_clip,
                                       int k) {
  check_clips(per_clip, "link_top_k");
  if (k < 1) return {};
  const std::size_t m = per_clip.size();
  // Every complete sequence has the same m, so ranking partial chains by
  // sum_a / m + sum_o / (m - 1) is consistent with the final score.
  auto key = [m](const Partial& p) { return finish(p.sum_a, p.sum_o, m); };
  auto order = [&](const Partial& a, const Partial& b) {
    return better(key(a), a.idx, key(b), b.idx);
  };

  std::vector<std::vector<Partial>> states(per_clip[0].size());
  for (std::size_t j = 0; j < per_clip[0].size(); ++j)
    states[j].push_back(Partial{per_clip[0][j].actionness, 0.0, {static_cast<int>(j)}});

  for (std::size_t c = 1; c < m; ++c) {
    std::vector<std::vector<Partial>> next(per_clip[c].size());
    for (std::size_t j = 0; j < per_clip[c].size(); ++j) {
      const TubeProposal& cur = per_clip[c][j];
      std::vector<Partial>& cand = next[j];
      for (std::size_t i = 0; i < states.size(); ++i) {
        const double ov = overlap(per_clip[c - 1][i], cur);
        for (const Partial& p : states[i]) {
          Partial q{p.sum_a + cur.actionness, p.sum_o + ov, p.idx};
          q.idx.push_back(static_cast<int>(j));
          cand.push_back(std::move(q));
        }
      }
      std::sort(cand.begin(), cand.end(), order);
      if (cand.size() > static_cast<std::size_t>(k)) cand.resize(static_cast<std::size_t>(k));
    }
    states = std::move(next);
  }

  std::vector<Partial> all;
  for (auto& s : states)
    for (auto& p : s) all.push_back(std::move(p));
  std::sort(all.begin(), all.end(), order);
  if (all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
  std::vector<LinkedSequence> out;
  out.reserve(all.size());
  for (Partial& p : all) out.push_back(make_sequence(per_clip, std::move(p.idx), key(p)));
  return out;
}

std::vector<LinkedSequence> brute_force_link(
    const std::vector<std::vector<TubeProposal>>& per_clip, int k) {
  check_clips(per_clip, "brute_force_link");
  double total = 1.0;
  for (const auto& c : per_clip) total *= static_cast<double>(c.size());
  if (total > 1e6)
    throw std::invalid_argument("brute_force_link: " + std::to_string(total) +
                                " sequences exceed the 1e6 limit");
  const std::size_t m = per_clip.size();
  std::vector<std::pair<double, std::vector<int>>> all;
  std::vector<int> idx(m, 0);
  while (true) {
    double sa = 0.0, so = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      sa += per_clip[i][idx[i]].actionness;
      if (i > 0) so += overlap(per_clip[i - 1][idx[i - 1]], per_clip[i][idx[i]]);
    }
    all.emplace_back(finish(sa, so, m), idx);
    std::size_t pos = m;
    bool carried_out = true;
    while (pos > 0) {
      --pos;
      if (++idx[pos] < static_cast<int>(per_clip[pos].size())) {
        carried_out = false;
        break;
      }
      idx[pos] = 0;
    }
    if (carried_out) break;
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return better(a.first, a.second, b.first, b.second);
  });
  if (k < 1) return {};
  if (all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
  std::vector<LinkedSequence> out;
  for (auto& [s, i] : all) out.push_back(make_sequence(per_clip, std::move(i), s));
  return out;
}

namespace {

// Frame -> box over the whole sequence; frames are numbered clip-relative
// by clip_index * clip_length + offset.
std::vector<std::pair<long, const Box*>> frames_of(const LinkedSequence& s) {
  std::vector<std::pair<long, const Box*>> out;
  for (const TubeProposal& p : s.proposals) {
    const long base = static_cast<long>(p.clip_index) * static_cast<long>(p.boxes.size());
    for (std::size_t f = 0; f < p.boxes.size(); ++f)
      out.emplace_back(base + static_cast<long>(f), &p.boxes[f]);
  }
  return out;
}

}  // namespace

double sequence_iou(const LinkedSequence& a, const LinkedSequence& b) {
  const auto fa = frames_of(a), fb = frames_of(b);
  double sum = 0.0;
  int common = 0;
  std::size_t j = 0;
  for (const auto& [t, box] : fa) {
    while (j < fb.size() && fb[j].first < t) ++j;
    if (j < fb.size() && fb[j].first == t) {
      sum += iou(*box, *fb[j].second);
      ++common;
    }
  }
  return common ? sum / common : 0.0;
}

std::vector<LinkedSequence> nms_sequences(std::vector<LinkedSequence> seqs, double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0))
    throw std::invalid_argument("nms_sequences: threshold must lie in (0,1)");
  std::stable_sort(seqs.begin(), seqs.end(),
                   [](const LinkedSequence& a, const LinkedSequence& b) {
                     return a.score > b.score;
                   });
  std::vector<LinkedSequence> kept;
  for (LinkedSequence& s : seqs) {
    bool suppressed = false;
    for (const LinkedSequence& k : kept)
      if (sequence_iou(s, k) > iou_thresh) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(std::move(s));
  }
  return kept;
}

void write_sequence(std::ostream& out, const LinkedSequence& s) {
  char buf[160];
  for (const TubeProposal& p : s.proposals)
    for (std::size_t f = 0; f < p.boxes.size(); ++f) {
      const Box& b = p.boxes[f];
      std::snprintf(buf, sizeof buf, "%d %zu %.3f %.3f %.3f %.3f %.6f\n", p.clip_index, f, b.x1,
                    b.y1, b.x2, b.y2, p.actionness);
      out << buf;
    }
}

}  // namespace tcnn
