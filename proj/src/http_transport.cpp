#include <httplib.h>

#include "socsim/errors.hpp"
#include "socsim/llm.hpp"

namespace socsim {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw TransportError("invalid URL '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpResponse HttpTransport::post(const HttpRequest& request) {
  const auto [origin, path] = split_url(request.url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeouts_.connect);
  client.set_read_timeout(timeouts_.read);
  client.set_write_timeout(timeouts_.read);

  httplib::Headers headers;
  std::string content_type = "application/json";
  for (const auto& [name, value] : request.headers) {
    if (name == "Content-Type") {
      content_type = value;
    } else {
      headers.emplace(name, value);
    }
  }
  auto result = client.Post(path, headers, request.body, content_type);
  if (!result) {
    throw TransportError("POST " + request.url + " failed: " +
                         httplib::to_string(result.error()));
  }
  return HttpResponse{result->status, result->body};
}

}  // namespace socsim
