#include "metabug/explain/path.hpp"

#include <algorithm>
#include <stdexcept>

#include "metabug/minilang/builtins.hpp"

namespace metabug::explain {

using minilang::ExprKind;
using minilang::Procedure;
using minilang::Program;
using minilang::Stmt;
using minilang::StmtKind;

namespace {

constexpr int kMaxInlineDepth = 4;
constexpr std::size_t kMaxSteps = 20000;

bool is_user_call(const Program& p, const Stmt& s) {
  return s.kind == StmtKind::Call && !s.value && p.find_procedure(s.name) != nullptr;
}

bool may_fail(const Stmt& s) {
  bool out = false;
  minilang::for_each_own_expr(s, [&](const minilang::Expr& e) {
    if (e.kind != ExprKind::Builtin) return;
    auto b = minilang::find_builtin(e.text);
    if (b && b->may_fail) out = true;
  });
  return out;
}

}  // namespace

std::vector<NodeId> PathCandidate::statements() const {
  std::vector<NodeId> out;
  out.reserve(steps.size());
  for (const auto& s : steps) out.push_back(s.stmt);
  return out;
}

SliceContext::SliceContext(const collectors::TestSlice& slice) : slice_(&slice) {
  const Program& p = slice.program;
  for (const auto& g : p.globals) stmts_[g.id] = &g;
  for (const auto& proc : p.procedures)
    minilang::for_each_stmt(proc.body, [&](const Stmt& s) {
      stmts_[s.id] = &s;
      owner_[s.id] = &proc;
    });
  if (!stmts_.count(slice.bug_point))
    throw std::invalid_argument("bug point " + std::to_string(slice.bug_point) +
                                " is not a statement of the slice");

  const Procedure* home = procedure_of(slice.bug_point);
  switch (slice.bug_kind) {
    case BugKind::NPD:
    case BugKind::AIO:
    case BugKind::NFE:
      required_ = slice.integral;
      required_.insert(slice.bug_point);
      if (home) roots_.push_back(home->name);
      break;
    case BugKind::LEAK:
      for (NodeId id : slice.integral)
        if (id != slice.bug_point) closes_.insert(id);
      required_.insert(slice.bug_point);
      if (home) roots_.push_back(home->name);
      break;
    case BugKind::RACE: {
      required_ = slice.integral;
      required_.insert(slice.bug_point);
      std::map<NodeId, std::size_t> order;
      for (const auto& proc : p.procedures)
        minilang::for_each_stmt(proc.body,
                                [&](const Stmt& s) { order.emplace(s.id, order.size()); });
      auto pick = [&](bool other_proc) {
        NodeId best = kNoNode;
        for (NodeId id : slice.integral) {
          if (id == slice.bug_point || !owner_.count(id)) continue;
          if (other_proc && owner_.at(id) == home) continue;
          if (best == kNoNode || order.at(id) > order.at(best)) best = id;
        }
        return best;
      };
      access_ = pick(true);
      if (access_ == kNoNode) access_ = pick(false);
      if (access_ == kNoNode || !home) break;
      reader_ = owner_.at(access_)->name;
      reader_first_ = !(home->name == p.entry && reader_ != p.entry);
      roots_ = reader_first_ ? std::vector<std::string>{reader_, home->name}
                             : std::vector<std::string>{home->name, reader_};
      break;
    }
  }
}

const Stmt* SliceContext::stmt(NodeId id) const {
  auto it = stmts_.find(id);
  return it == stmts_.end() ? nullptr : it->second;
}

const Procedure* SliceContext::procedure_of(NodeId id) const {
  auto it = owner_.find(id);
  return it == owner_.end() ? nullptr : it->second;
}

const std::set<NodeId>& SliceContext::reachable_from(const Procedure& proc) const {
  auto it = reach_cache_.find(proc.name);
  if (it != reach_cache_.end()) return it->second;
  std::set<NodeId> out;
  std::set<std::string> seen{proc.name};
  std::vector<const Procedure*> work{&proc};
  while (!work.empty()) {
    const Procedure* cur = work.back();
    work.pop_back();
    minilang::for_each_stmt(cur->body, [&](const Stmt& s) {
      out.insert(s.id);
      if (is_user_call(program(), s) && seen.insert(s.name).second)
        work.push_back(program().find_procedure(s.name));
    });
  }
  return reach_cache_[proc.name] = std::move(out);
}

bool SliceContext::covers(const std::vector<Stmt>& block, NodeId id) const {
  return covers_any(block, {id});
}

bool SliceContext::covers_any(const std::vector<Stmt>& block, const std::set<NodeId>& ids) const {
  bool found = false;
  minilang::for_each_stmt(block, [&](const Stmt& s) {
    if (found) return;
    if (ids.count(s.id)) found = true;
    if (!found && is_user_call(program(), s)) {
      const auto& r = reachable_from(*program().find_procedure(s.name));
      for (NodeId id : ids)
        if (r.count(id)) found = true;
    }
  });
  return found;
}

namespace {

class Walker {
 public:
  Walker(const SliceContext& ctx, const Decisions& d, const Unrolling& u, PathCandidate& out)
      : ctx_(ctx), d_(d), u_(u), out_(out) {}

  /// Walks `proc` in a fresh activation; stops before `stop_before` if given.
  /// Returns true when the stop statement was reached.
  bool run(const std::string& proc, NodeId stop_before = kNoNode, int* frame_out = nullptr) {
    stop_before_ = stop_before;
    stopped_ = false;
    const Procedure* p = ctx_.program().find_procedure(proc);
    if (!p) return false;
    int frame = next_frame_++;
    if (frame_out) *frame_out = frame;
    out_.frames[frame] = p->name;
    stack_ = {p->name};
    block(p->body, frame);
    return stopped_ && stop_before != kNoNode;
  }

 private:
  const SliceContext& ctx_;
  const Decisions& d_;
  const Unrolling& u_;
  PathCandidate& out_;
  NodeId stop_before_ = kNoNode;
  bool stopped_ = false;
  int next_frame_ = 0;
  std::vector<std::string> stack_;

  int decision(NodeId id) const {
    auto it = d_.find(id);
    return it == d_.end() ? 1 : it->second;
  }

  void emit(PathStep s) {
    out_.steps.push_back(s);
    if (out_.steps.size() >= kMaxSteps) stopped_ = true;
  }

  // Returns false once the activation returned or the walk stopped.
  bool block(const std::vector<Stmt>& body, int frame) {
    for (const auto& s : body) {
      if (stopped_) return false;
      if (s.id == stop_before_) {
        stopped_ = true;
        return false;
      }
      switch (s.kind) {
        case StmtKind::If: {
          bool then_arm = decision(s.id) == 0;
          emit({s.id, then_arm, frame, -1});
          if (!block(then_arm ? s.then_body : s.else_body, frame)) return false;
          break;
        }
        case StmtKind::While: {
          if (decision(s.id) == 0) {
            auto it = u_.find(s.id);
            int n = it == u_.end() ? 1 : std::clamp(it->second, 1, kMaxUnroll);
            for (int i = 0; i < n; ++i) {
              emit({s.id, true, frame, -1});
              if (!block(s.then_body, frame)) return false;
            }
          }
          emit({s.id, false, frame, -1});
          break;
        }
        case StmtKind::Return: emit({s.id, std::nullopt, frame, -1}); return false;
        case StmtKind::Call: {
          const Procedure* callee = ctx_.program().find_procedure(s.name);
          bool inline_it = !s.value && callee && stack_.size() < kMaxInlineDepth &&
                           std::find(stack_.begin(), stack_.end(), s.name) == stack_.end();
          if (!inline_it) {
            emit({s.id, std::nullopt, frame, -1});
            break;
          }
          int inner = next_frame_++;
          out_.frames[inner] = callee->name;
          emit({s.id, std::nullopt, frame, inner});
          stack_.push_back(callee->name);
          block(callee->body, inner);
          stack_.pop_back();
          if (stopped_) return false;
          break;
        }
        default: emit({s.id, std::nullopt, frame, -1});
      }
    }
    return !stopped_;
  }
};

// Index one past the last occurrence of `id`, or 0.
std::size_t cut_after_last(const std::vector<PathStep>& steps, NodeId id) {
  for (std::size_t i = steps.size(); i-- > 0;)
    if (steps[i].stmt == id) return i + 1;
  return 0;
}

}  // namespace

PathCandidate build_path(const SliceContext& ctx, const Decisions& decisions,
                         const Unrolling& unroll) {
  PathCandidate out;
  out.decisions = decisions;
  out.unroll = unroll;
  for (const auto& g : ctx.program().globals) out.steps.push_back({g.id, std::nullopt, -1, -1});
  const std::size_t prefix = out.steps.size();
  Walker walker(ctx, decisions, unroll, out);
  const NodeId bug = ctx.slice().bug_point;

  if (ctx.kind() == BugKind::RACE) {
    if (ctx.roots().size() != 2) return out;
    NodeId access = ctx.race_access();
    auto write_part = [&] {
      std::size_t from = out.steps.size();
      walker.run(ctx.roots()[ctx.reader_first() ? 1 : 0]);
      std::vector<PathStep> part(out.steps.begin() + static_cast<std::ptrdiff_t>(from),
                                 out.steps.end());
      std::size_t cut = cut_after_last(part, bug);
      out.steps.resize(from + cut);
      return cut > 0;
    };
    int reader_frame = -1;
    bool wrote = false, read = false;
    if (ctx.reader_first()) {
      read = walker.run(ctx.reader(), access, &reader_frame);
      wrote = read && write_part();
    } else {
      wrote = write_part();
      read = wrote && walker.run(ctx.reader(), access, &reader_frame);
    }
    if (wrote && read) {
      out.steps.push_back({access, std::nullopt, reader_frame, -1});
      out.reaches_bug = true;
    }
    return out;
  }

  for (const auto& root : ctx.roots()) walker.run(root);
  if (ctx.kind() == BugKind::LEAK) {
    std::size_t open = out.steps.size();
    for (std::size_t i = prefix; i < out.steps.size(); ++i)
      if (out.steps[i].stmt == bug) {
        open = i;
        break;
      }
    if (open == out.steps.size()) return out;
    int frame = out.steps[open].frame;
    for (std::size_t i = open + 1; i < out.steps.size(); ++i) {
      const PathStep& st = out.steps[i];
      if (ctx.closes().count(st.stmt)) return out;
      if (st.frame == frame && may_fail(*ctx.stmt(st.stmt))) {
        out.steps.resize(i + 1);
        out.reaches_bug = true;
        return out;
      }
    }
    out.reaches_bug = true;
    return out;
  }
  std::size_t cut = cut_after_last(out.steps, bug);
  if (cut > prefix) {
    out.steps.resize(cut);
    out.reaches_bug = true;
  }
  return out;
}

std::vector<NodeId> decision_points(const SliceContext& ctx) {
  std::vector<NodeId> out;
  std::set<std::string> seen;
  std::vector<const Procedure*> work;
  for (const auto& r : ctx.roots())
    if (const Procedure* p = ctx.program().find_procedure(r); p && seen.insert(r).second)
      work.push_back(p);
  for (std::size_t i = 0; i < work.size(); ++i)
    minilang::for_each_stmt(work[i]->body, [&](const Stmt& s) {
      if (s.kind == StmtKind::If || s.kind == StmtKind::While) out.push_back(s.id);
      if (is_user_call(ctx.program(), s) && seen.insert(s.name).second)
        work.push_back(ctx.program().find_procedure(s.name));
    });
  return out;
}

std::vector<NodeId> decisions_on(const SliceContext& ctx, const PathCandidate& path) {
  (void)ctx;
  std::vector<NodeId> out;
  std::set<NodeId> seen;
  for (const auto& s : path.steps)
    if (s.branch && seen.insert(s.stmt).second) out.push_back(s.stmt);
  return out;
}

std::vector<NodeId> loops_on(const SliceContext& ctx, const PathCandidate& path) {
  std::vector<NodeId> out;
  std::set<NodeId> seen;
  for (const auto& s : path.steps) {
    const Stmt* st = ctx.stmt(s.stmt);
    if (st && st->kind == StmtKind::While && s.branch && *s.branch && seen.insert(s.stmt).second)
      out.push_back(s.stmt);
  }
  return out;
}

}  // namespace metabug::explain
