/** Browser bootstrap: mount the app against the service named by the
 * `?service=` query parameter, defaulting to the page's own origin. */

import { ApiClient } from "./api.js";
import { mount } from "./app.js";

const params = new URLSearchParams(window.location.search);
const base = params.get("service") ?? window.location.origin;
const root = document.getElementById("app");
if (root !== null) {
  mount(root, new ApiClient(base));
}
