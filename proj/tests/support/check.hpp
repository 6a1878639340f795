#pragma once

#include <doctest.h>

#include "ncmdp/error.hpp"

// Runs `fn` and checks that it throws ncmdp::Error with the given code.
template <typename Fn>
void check_error(Fn&& fn, ncmdp::ErrorCode code) {
  bool thrown = false;
  try {
    fn();
  } catch (const ncmdp::Error& e) {
    thrown = true;
    CHECK_MESSAGE(e.code() == code, "got " << ncmdp::to_string(e.code()) << ": " << e.what());
  }
  CHECK_MESSAGE(thrown, "expected " << ncmdp::to_string(code));
}
