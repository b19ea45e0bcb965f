import { ApiClient } from "./api.js";
import { App } from "./app.js";

const api = new ApiClient("");
const app = new App(api);
void app.mount(document.getElementById("app")!);
