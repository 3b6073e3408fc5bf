// Browser entry point: join an existing session (?session=...) or show a
// small create-session form. The backend base URL defaults to the page
// origin and can be overridden with ?base=http://host:port.

import { createIde } from "./app.js";

function queryParam(name: string): string | null {
  return new URLSearchParams(window.location.search).get(name);
}

async function boot(): Promise<void> {
  const root = document.getElementById("ide") ?? document.body;
  const baseUrl = queryParam("base") ?? window.location.origin;
  const sessionId = queryParam("session");
  const token = queryParam("token");

  if (sessionId) {
    await createIde(root, { baseUrl, sessionId, token });
    return;
  }

  root.innerHTML = `
    <form class="create-form">
      <h1>Open a workspace</h1>
      <label>User <input name="userId" value="student" required></label>
      <label>Exercise <input name="exerciseId" value="exercise-1" required></label>
      <label>Language
        <select name="language">
          <option value="python">python</option>
          <option value="java">java</option>
          <option value="c">c</option>
        </select>
      </label>
      <label>Repository URL <input name="repoUrl" placeholder="/srv/exercises/ex1.git" required></label>
      <button type="submit">Start coding</button>
      <p class="form-error" hidden></p>
    </form>`;
  const form = root.querySelector(".create-form") as HTMLFormElement;
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const errorEl = form.querySelector(".form-error") as HTMLElement;
    try {
      const app = await createIde(root, {
        baseUrl,
        token,
        create: {
          userId: String(data.get("userId")),
          exerciseId: String(data.get("exerciseId")),
          language: String(data.get("language")),
          repoUrl: String(data.get("repoUrl")),
        },
      });
      const url = new URL(window.location.href);
      url.searchParams.set("session", app.session.sessionId);
      window.history.replaceState(null, "", url.toString());
    } catch (error) {
      errorEl.hidden = false;
      errorEl.textContent = String(error);
    }
  });
}

boot().catch((error) => {
  console.error("IDE failed to start:", error);
  document.body.insertAdjacentHTML(
    "beforeend",
    `<p class="boot-error">IDE failed to start: ${String(error)}</p>`,
  );
});
