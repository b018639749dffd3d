#include "rehab/data.hpp"

#include "rehab/error.hpp"

#include <fstream>
#include <sstream>

namespace rehab {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileUnreadable("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw FileUnreadable("read failed: " + path);
  return ss.str();
}

}  // namespace rehab
