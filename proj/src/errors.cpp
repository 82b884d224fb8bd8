#include "vmbo/errors.hpp"

namespace vmbo {

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter: return "parameter error";
    case ErrorKind::constraint: return "constraint error";
    case ErrorKind::input: return "input error";
    case ErrorKind::structural: return "structural error";
    case ErrorKind::format: return "format error";
    case ErrorKind::config: return "config error";
    case ErrorKind::numerical: return "numerical error";
  }
  return "error";
}

}  // namespace vmbo
