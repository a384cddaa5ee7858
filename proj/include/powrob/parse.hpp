#pragma once

#include <cctype>
#include <stdexcept>
#include <string>
#include <vector>

#include "program.hpp"

namespace powrob {

class ParseError : public std::runtime_error {
public:
  ParseError(int line, int col, const std::string& msg)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) + ": " + msg), line_(line), col_(col) {}
  int line() const { return line_; }
  int column() const { return col_; }

private:
  int line_, col_;
};

class SemanticError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {

struct Token {
  enum class Kind { Ident, Number, Sym, Newline, End };
  Kind kind;
  std::string text;
  int line, col;
};

inline std::vector<Token> tokenize(const std::string& src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    i += n;
    col += static_cast<int>(n);
  };
  while (i < src.size()) {
    char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (c == '\n') {
      out.push_back({Token::Kind::Newline, "\n", line, col});
      ++i;
      ++line;
      col = 1;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      out.push_back({Token::Kind::Ident, src.substr(i, j - i), line, col});
      advance(j - i);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      out.push_back({Token::Kind::Number, src.substr(i, j - i), line, col});
      advance(j - i);
      continue;
    }
    static const char* two[] = {"->", "<-", "==", "!="};
    bool matched = false;
    for (const char* t : two) {
      if (src.compare(i, 2, t) == 0) {
        out.push_back({Token::Kind::Sym, t, line, col});
        advance(2);
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (std::string("{}:[]()&+-*<").find(c) != std::string::npos) {
      out.push_back({Token::Kind::Sym, std::string(1, c), line, col});
      advance(1);
      continue;
    }
    throw ParseError(line, col, std::string("unexpected character '") + c + "'");
  }
  out.push_back({Token::Kind::End, "", line, col});
  return out;
}

class Parser {
public:
  explicit Parser(const std::string& text) : toks_(tokenize(text)) {}

  Program run() {
    Program p;
    skip_newlines();
    expect_word("program");
    p.name = expect(Token::Kind::Ident, "program name").text;
    end_line();
    expect_word("domain");
    const Token& d = expect(Token::Kind::Number, "domain size");
    p.domain.size = std::stoi(d.text);
    if (p.domain.size < 1) throw SemanticError("domain size must be positive");
    end_line();
    prog_ = &p;
    if (peek_word("vars")) {
      next();
      while (peek().kind == Token::Kind::Ident) {
        const Token& v = next();
        symbol(v.text, v);
      }
      end_line();
    }
    while (peek().kind != Token::Kind::End) parse_thread(p);
    if (p.threads.empty()) throw SemanticError("program has no threads");
    return p;
  }

private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  Program* prog_ = nullptr;
  Thread* thread_ = nullptr;

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }
  bool peek_word(const char* w) const { return peek().kind == Token::Kind::Ident && peek().text == w; }
  bool peek_sym(const char* s) const { return peek().kind == Token::Kind::Sym && peek().text == s; }

  [[noreturn]] void fail(const Token& t, const std::string& msg) const { throw ParseError(t.line, t.col, msg); }

  const Token& expect(Token::Kind k, const char* what) {
    if (peek().kind != k) fail(peek(), std::string("expected ") + what);
    return next();
  }
  void expect_word(const char* w) {
    if (!peek_word(w)) fail(peek(), std::string("expected '") + w + "'");
    next();
  }
  void expect_sym(const char* s) {
    if (!peek_sym(s)) fail(peek(), std::string("expected '") + s + "'");
    next();
  }
  void skip_newlines() {
    while (peek().kind == Token::Kind::Newline) next();
  }
  void end_line() {
    if (peek().kind == Token::Kind::End) return;
    if (peek().kind != Token::Kind::Newline) fail(peek(), "expected end of line");
    skip_newlines();
  }

  int symbol(const std::string& name, const Token& at) {
    for (const auto& [n, v] : prog_->symbols)
      if (n == name) return v;
    int v = static_cast<int>(prog_->symbols.size());
    if (v >= prog_->domain.size)
      throw SemanticError(std::to_string(at.line) + ":" + std::to_string(at.col) + ": address &" + name +
                          " does not fit in domain " + std::to_string(prog_->domain.size));
    prog_->symbols.emplace_back(name, v);
    return v;
  }

  int state(const std::string& name) {
    for (std::size_t i = 0; i < thread_->states.size(); ++i)
      if (thread_->states[i] == name) return static_cast<int>(i);
    thread_->states.push_back(name);
    return static_cast<int>(thread_->states.size() - 1);
  }

  int reg(const Token& t) {
    if (t.text == "mem" || t.text == "assume") fail(t, "keyword used as register");
    auto& rs = thread_->registers;
    for (std::size_t i = 0; i < rs.size(); ++i)
      if (rs[i] == t.text) return static_cast<int>(i);
    rs.push_back(t.text);
    return static_cast<int>(rs.size() - 1);
  }

  void parse_thread(Program& p) {
    expect_word("thread");
    const Token& idt = expect(Token::Kind::Number, "thread id");
    int id = std::stoi(idt.text);
    if (id != p.num_threads() + 1)
      throw SemanticError(std::to_string(idt.line) + ": thread ids must be 1.." + std::to_string(p.num_threads() + 1) +
                          " in order");
    expect_sym("{");
    end_line();
    p.threads.push_back(Thread{});
    thread_ = &p.threads.back();
    thread_->id = id;
    bool have_init = false;
    while (!peek_sym("}")) {
      if (peek().kind == Token::Kind::End) fail(peek(), "unterminated thread block");
      if (peek_word("init")) {
        const Token& at = next();
        if (have_init || !thread_->instructions.empty()) fail(at, "'init' must come first in a thread block");
        thread_->initial = state(expect(Token::Kind::Ident, "control state").text);
        have_init = true;
        end_line();
        continue;
      }
      parse_transition(have_init);
      end_line();
    }
    next();
    end_line();
    if (thread_->states.empty()) thread_->states.push_back("q0");
  }

  void parse_transition(bool have_init) {
    const Token& from = expect(Token::Kind::Ident, "control state");
    expect_sym("->");
    const Token& to = expect(Token::Kind::Ident, "control state");
    expect_sym(":");
    Instruction in;
    in.tid = thread_->id;
    in.src = state(from.text);
    in.dst = state(to.text);
    if (!have_init && thread_->instructions.empty()) thread_->initial = in.src;
    in.cmd = parse_command();
    for (const auto& other : thread_->instructions)
      if (other.src == in.src && other.dst == in.dst && other.cmd == in.cmd)
        throw SemanticError(std::to_string(from.line) + ": duplicate transition " + from.text + " -> " + to.text);
    in.id = static_cast<int>(thread_->instructions.size());
    thread_->instructions.push_back(std::move(in));
  }

  Command parse_command() {
    Command c;
    if (peek_word("mem")) {
      next();
      expect_sym("[");
      c.kind = Command::Kind::Store;
      c.addr = parse_expr();
      expect_sym("]");
      expect_sym("<-");
      c.value = parse_expr();
      return c;
    }
    if (peek_word("assume")) {
      next();
      expect_sym("(");
      c.kind = Command::Kind::Assume;
      c.value = parse_expr();
      expect_sym(")");
      return c;
    }
    const Token& r = expect(Token::Kind::Ident, "command");
    c.reg = reg(r);
    expect_sym("<-");
    if (peek_word("mem")) {
      next();
      expect_sym("[");
      c.kind = Command::Kind::Load;
      c.addr = parse_expr();
      expect_sym("]");
    } else {
      c.kind = Command::Kind::Assign;
      c.value = parse_expr();
    }
    return c;
  }

  Expr parse_expr() {
    Expr e = parse_sum();
    while (peek_sym("==") || peek_sym("!=") || peek_sym("<")) {
      std::string s = next().text;
      Op op = s == "==" ? Op::Eq : s == "!=" ? Op::Neq : Op::Lt;
      e = Expr::apply(op, std::move(e), parse_sum());
    }
    return e;
  }
  Expr parse_sum() {
    Expr e = parse_product();
    while (peek_sym("+") || peek_sym("-")) {
      Op op = next().text == "+" ? Op::Add : Op::Sub;
      e = Expr::apply(op, std::move(e), parse_product());
    }
    return e;
  }
  Expr parse_product() {
    Expr e = parse_atom();
    while (peek_sym("*")) {
      next();
      e = Expr::apply(Op::Mul, std::move(e), parse_atom());
    }
    return e;
  }
  Expr parse_atom() {
    const Token& t = peek();
    if (t.kind == Token::Kind::Number) {
      next();
      long long v = std::stoll(t.text);
      if (v >= prog_->domain.size)
        throw SemanticError(std::to_string(t.line) + ":" + std::to_string(t.col) + ": constant " + t.text +
                            " outside domain " + std::to_string(prog_->domain.size));
      return Expr::constant(static_cast<int>(v));
    }
    if (peek_sym("&")) {
      next();
      const Token& n = expect(Token::Kind::Ident, "address name");
      return Expr::address(symbol(n.text, n), n.text);
    }
    if (peek_sym("(")) {
      next();
      Expr e = parse_expr();
      expect_sym(")");
      return e;
    }
    if (t.kind == Token::Kind::Ident) {
      next();
      return Expr::reg(reg(t), t.text);
    }
    fail(t, "expected expression");
  }
};

}  // namespace detail

inline Program parse_program(const std::string& text) { return detail::Parser(text).run(); }

}  // namespace powrob
