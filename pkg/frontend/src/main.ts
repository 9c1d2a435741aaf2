import { ApiClient } from "./api.js";
import { App } from "./app.js";

const app = new App(document, new ApiClient(""));
void app.init();
