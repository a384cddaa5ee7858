#pragma once

#include <algorithm>
#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace powrob {

template <class Symbol>
class Nfa {
public:
  struct Label {
    enum class Kind { Epsilon, Exact, Pred };
    Kind kind = Kind::Epsilon;
    Symbol sym{};
    std::function<bool(const Symbol&)> pred;

    bool matches(const Symbol& x) const {
      switch (kind) {
        case Kind::Epsilon: return false;
        case Kind::Exact: return sym == x;
        case Kind::Pred: return pred(x);
      }
      return false;
    }
  };
  struct Transition {
    int from;
    Label label;
    int to;
  };

  // Language is closed under permutation of words; lets products read symbols in any order.
  bool commutative = false;

  int add_state(bool final = false) {
    finals_.push_back(final);
    out_.emplace_back();
    return static_cast<int>(finals_.size()) - 1;
  }
  void set_initial(int q) { initial_ = q; }
  void set_final(int q, bool f = true) { finals_.at(q) = f; }
  void add_epsilon(int from, int to) { add({from, Label{Label::Kind::Epsilon, {}, {}}, to}); }
  void add_exact(int from, const Symbol& x, int to) { add({from, Label{Label::Kind::Exact, x, {}}, to}); }
  void add_pred(int from, std::function<bool(const Symbol&)> pred, int to) {
    add({from, Label{Label::Kind::Pred, {}, std::move(pred)}, to});
  }

  int size() const { return static_cast<int>(finals_.size()); }
  int initial() const { return initial_; }
  bool is_final(int q) const { return finals_.at(q); }
  const std::vector<Transition>& transitions() const { return trans_; }

  std::vector<int> closure(std::vector<int> qs) const {
    std::vector<char> in(size(), 0);
    std::vector<int> stack;
    for (int q : qs)
      if (!in[q]) {
        in[q] = 1;
        stack.push_back(q);
      }
    while (!stack.empty()) {
      int q = stack.back();
      stack.pop_back();
      for (int k : out_[q]) {
        const auto& tr = trans_[k];
        if (tr.label.kind == Label::Kind::Epsilon && !in[tr.to]) {
          in[tr.to] = 1;
          stack.push_back(tr.to);
        }
      }
    }
    std::vector<int> out;
    for (int q = 0; q < size(); ++q)
      if (in[q]) out.push_back(q);
    return out;
  }

  // States reachable from q by reading x, epsilon moves allowed before and after.
  std::vector<int> step(int q, const Symbol& x) const {
    std::vector<int> next;
    if (!has_epsilon_) {
      for (int k : out_[q])
        if (trans_[k].label.matches(x)) next.push_back(trans_[k].to);
      std::sort(next.begin(), next.end());
      next.erase(std::unique(next.begin(), next.end()), next.end());
      return next;
    }
    for (int r : closure({q}))
      for (int k : out_[r]) {
        const auto& tr = trans_[k];
        if (tr.label.matches(x)) next.push_back(tr.to);
      }
    return closure(next);
  }

  bool accepting(int q) const {
    if (!has_epsilon_) return finals_[q];
    for (int r : closure({q}))
      if (finals_[r]) return true;
    return false;
  }

  bool accepts(const std::vector<Symbol>& w) const {
    std::vector<int> cur = closure({initial_});
    for (const auto& x : w) {
      std::set<int> next;
      for (int q : cur)
        for (int r : step(q, x)) next.insert(r);
      cur.assign(next.begin(), next.end());
    }
    for (int q : cur)
      if (finals_[q]) return true;
    return false;
  }

  // States from which an accepting state is reachable.
  std::vector<char> productive() const {
    std::vector<char> ok(finals_.begin(), finals_.end());
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& tr : trans_)
        if (ok[tr.to] && !ok[tr.from]) ok[tr.from] = changed = true;
    }
    return ok;
  }

  static Nfa universal() {
    Nfa n;
    n.commutative = true;
    int q = n.add_state(true);
    n.set_initial(q);
    n.add_pred(q, [](const Symbol&) { return true; }, q);
    return n;
  }
  static Nfa empty() {
    Nfa n;
    n.commutative = true;
    n.set_initial(n.add_state(false));
    return n;
  }

private:
  int initial_ = 0;
  bool has_epsilon_ = false;
  std::vector<char> finals_;
  std::vector<Transition> trans_;
  std::vector<std::vector<int>> out_;

  void add(Transition t) {
    if (t.from < 0 || t.from >= size() || t.to < 0 || t.to >= size())
      throw std::out_of_range("transition references an undeclared state");
    if (t.label.kind == Label::Kind::Epsilon) has_epsilon_ = true;
    out_[t.from].push_back(static_cast<int>(trans_.size()));
    trans_.push_back(std::move(t));
  }
};

}  // namespace powrob
